"""Procedural tabletop scene generator with exact reflectance/shading ground truth."""

from .backend import active_backend
from .generate import generate_dataset
from .render import render, render_full
from .scene import LightSpec, ObjectSpec, SceneSpec, TextureSpec, sample_light, sample_scene

__all__ = [
    "LightSpec",
    "ObjectSpec",
    "SceneSpec",
    "TextureSpec",
    "active_backend",
    "generate_dataset",
    "render",
    "render_full",
    "sample_light",
    "sample_scene",
]

"""Loader for the editable prompt text assets shipped with the package."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from string import Template


@lru_cache(maxsize=None)
def prompt_text(name: str) -> str:
    return resources.files("litsynth").joinpath("prompts", f"{name}.txt").read_text("utf-8")


def render_prompt(name: str, **values: object) -> str:
    return Template(prompt_text(name)).substitute(**values)

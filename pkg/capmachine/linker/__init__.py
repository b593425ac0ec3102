from .link import (
    ComponentLayout,
    ComponentRanges,
    Layout,
    SystemImage,
    format_image,
    layout_to_dict,
    link,
    load_layout,
    parse_image,
    read_flag,
)
from .objects import ObjectImage, build_component, format_object, parse_object

__all__ = [
    "ComponentLayout",
    "ComponentRanges",
    "Layout",
    "ObjectImage",
    "SystemImage",
    "build_component",
    "format_image",
    "format_object",
    "layout_to_dict",
    "link",
    "load_layout",
    "parse_image",
    "parse_object",
    "read_flag",
]

from gmar.data.images import (
    Image,
    decode_ppm,
    encode_ppm,
    load_image_ppm,
    resize_bilinear,
    resize_grid,
    save_image_ppm,
)
from gmar.data.render import RenderMode, colormap_diverging, colormap_sequential, render_heatmap
from gmar.data.synthetic import (
    SyntheticDatasetSpec,
    generate_synthetic,
    mirror_label_map,
    parse_dataset_flag,
    quadrant_bounds,
    synthetic_from_flag,
)
from gmar.data.weights import load_weights, save_weights

__all__ = [
    "Image",
    "RenderMode",
    "SyntheticDatasetSpec",
    "colormap_diverging",
    "colormap_sequential",
    "decode_ppm",
    "encode_ppm",
    "generate_synthetic",
    "load_image_ppm",
    "load_weights",
    "mirror_label_map",
    "parse_dataset_flag",
    "quadrant_bounds",
    "render_heatmap",
    "resize_bilinear",
    "resize_grid",
    "save_image_ppm",
    "save_weights",
    "synthetic_from_flag",
]

"""Pixel-level primitives shared by every pipeline."""

from .color import rgb_to_gray, rgb_to_hsv, rgb_to_lab_l, saturation
from .components import LabelMap, component_stats, connected_components, remove_small
from .edges import canny, sobel
from .ellipse import Ellipse, interior_mask, perimeter_mask, perimeter_pixels
from .filters import clahe, dilate, erode, gaussian_blur, median_filter
from .hough import hough_ellipse
from .io import read_image, read_mask, write_image, write_mask

__all__ = [
    "Ellipse",
    "LabelMap",
    "canny",
    "clahe",
    "component_stats",
    "connected_components",
    "dilate",
    "erode",
    "gaussian_blur",
    "hough_ellipse",
    "interior_mask",
    "median_filter",
    "perimeter_mask",
    "perimeter_pixels",
    "read_image",
    "read_mask",
    "remove_small",
    "rgb_to_gray",
    "rgb_to_hsv",
    "rgb_to_lab_l",
    "saturation",
    "sobel",
    "write_image",
    "write_mask",
]

"""Fractal convolution segmentation, MosaicSlice augmentation and tile filling
for heritage imagery."""

__version__ = "0.1.0"

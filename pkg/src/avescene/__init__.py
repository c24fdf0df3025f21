"""avescene: fuse geotagged photographs with open geospatial data into
metric 3D scenes that can be explored, textured, and served live.

The pipeline: parse photo metadata and OpenStreetMap building outlines,
convert everything into one anchor-relative metric frame, extrude
footprints into meshes, model each photo as a perspective projector with
occlusion-correct surface masking, anchor externally detected objects in
the scene, and sync the resulting scene state to clients over UDP or a
websocket bridge.
"""

__version__ = "0.1.0"

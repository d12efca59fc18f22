from .heatmap import (
    generate_heatmap_data, to_grayscale, write_heatmap_html, write_heatmap_png, write_ridge_csv
)

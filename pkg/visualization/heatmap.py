"""
Visualization utilities for spectrograms.

Grayscale PNG heatmaps (row 0 = lowest frequency at the image bottom) and
optional interactive HTML heatmaps.
"""
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd
import plotly.graph_objects as go
from PIL import Image

from models.spectrogram import CSV_FLOAT_FORMAT, Spectrogram

PathLike = Union[str, Path]


def to_grayscale(spec: Spectrogram) -> np.ndarray:
    """Intensity scaled to its maximum and quantized to 8 bits"""
    peak = float(spec.intensity.max()) if spec.intensity.size else 0.0
    if peak <= 0:
        return np.zeros(spec.shape, dtype=np.uint8)
    return np.round(np.clip(spec.intensity / peak, 0.0, 1.0) * 255).astype(np.uint8)


def write_heatmap_png(spec: Spectrogram, path: PathLike) -> Path:
    """Bit-reproducible 8-bit single-channel PNG, one pixel per matrix cell"""
    path = Path(path)
    # image row 0 is the top, so the lowest frequency goes last
    # a 2-D uint8 array maps to mode "L"
    Image.fromarray(np.ascontiguousarray(np.flipud(to_grayscale(spec)))).save(path, format="PNG")
    return path


def generate_heatmap_data(spec: Spectrogram, title: Optional[str] = None) -> Dict:
    """
    Generate axis-labelled heatmap data.

    Args:
        spec: spectrogram to render
        title: optional figure title

    Returns:
        Dictionary with time (us), frequency (GHz) and intensity lists
    """
    return {
        'title': title or '',
        'timeUs': (spec.time_axis_s * 1e6).tolist(),
        'freqGHz': (spec.freq_axis_hz / 1e9).tolist(),
        'intensity': spec.intensity.tolist(),
        'normalization': spec.normalization.value
    }


def write_heatmap_html(spec: Spectrogram, path: PathLike, title: Optional[str] = None) -> Path:
    """Interactive heatmap; plotly.js is loaded from the CDN"""
    data = generate_heatmap_data(spec, title)
    figure = go.Figure(go.Heatmap(z=data['intensity'], x=data['timeUs'], y=data['freqGHz'],
                                  colorscale='gray', zmin=0))
    figure.update_layout(title=data['title'], xaxis_title='Time (us)', yaxis_title='Frequency (GHz)')
    path = Path(path)
    figure.write_html(path, include_plotlyjs='cdn', full_html=True, div_id='spectrogram')
    return path


def write_ridge_csv(time_axis_s: np.ndarray, ridge_hz: np.ndarray, path: PathLike,
                    error_hz: Optional[np.ndarray] = None) -> Path:
    """Ridge per time column, with its distance to ground truth; unlit columns are left empty"""
    frame = pd.DataFrame({'time_s': time_axis_s, 'ridge_hz': ridge_hz})
    if error_hz is not None:
        frame['abs_error_hz'] = error_hz
    path = Path(path)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return path

#!/usr/bin/env python3
"""
SVG 渲染工具模块
排名散点图、PD/ICE 曲线（有支撑段实线、无支撑段虚线）、二维预测场热力图
输出只依赖输入和样式，相同输入得到逐字节相同的 SVG
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

from core.effects import EffectCurve, GridField
from core.errors import DataError
from core.importance import RankTable

logger = logging.getLogger(__name__)

DEFAULT_STYLE = {
    'width': 480,
    'height': 360,
    'margin': 48,
    'stroke': '#1f4e79',
    'stroke_width': 1.2,
    'point_radius': 3.5,
    'font_size': 11,
    'title': '',
    'field': 'mean',
}

# 热力图色带（深蓝 → 青 → 黄），线性插值
COLOR_STOPS = ((0.0, (68, 1, 84)), (0.5, (33, 145, 140)), (1.0, (253, 231, 37)))


class SVG:
    def __init__(self):
        self.svg = ""

    def header(self, width, height):
        self.svg += (f'<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'
                     f'<svg version="1.1" width="{width}" height="{height}" '
                     f'viewBox="0 0 {width} {height}" xmlns="http://www.w3.org/2000/svg">\n'
                     f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>\n')

    def polyline(self, points, stroke, width, dashed=False):
        coords = ' '.join(f'{x:.2f},{y:.2f}' for x, y in points)
        dash = ' stroke-dasharray="4,3"' if dashed else ''
        self.svg += (f'<polyline points="{coords}" fill="none" stroke="{stroke}" '
                     f'stroke-width="{width}"{dash}/>\n')

    def line(self, x1, y1, x2, y2, stroke='#000000'):
        self.svg += f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" stroke="{stroke}"/>\n'

    def circle(self, x, y, r, fill):
        self.svg += f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r:.2f}" fill="{fill}"/>\n'

    def filled_rectangle(self, x1, y1, x2, y2, fill):
        self.svg += (f'<rect x="{x1:.2f}" y="{y1:.2f}" width="{x2 - x1:.2f}" '
                     f'height="{y2 - y1:.2f}" fill="{fill}" stroke="none"/>\n')

    def text(self, x, y, string, size, anchor='middle'):
        self.svg += (f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" font-family="sans-serif" '
                     f'text-anchor="{anchor}">{escape(str(string))}</text>\n')

    def get_svg(self):
        return f"{self.svg}</svg>\n"


class _Frame:
    """数据坐标到画布坐标的映射"""

    def __init__(self, style: Dict, x_range: Tuple[float, float], y_range: Tuple[float, float]):
        self.style = style
        self.x0, self.x1 = _padded(x_range)
        self.y0, self.y1 = _padded(y_range)
        m = style['margin']
        self.left, self.right = m, style['width'] - m / 2
        self.top, self.bottom = m / 2, style['height'] - m

    def x(self, v: float) -> float:
        return self.left + (v - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def y(self, v: float) -> float:
        return self.bottom - (v - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)

    def draw_axes(self, svg: SVG, x_label: str, y_label: str):
        size = self.style['font_size']
        svg.line(self.left, self.bottom, self.right, self.bottom)
        svg.line(self.left, self.bottom, self.left, self.top)
        for v in (self.x0, self.x1):
            svg.text(self.x(v), self.bottom + size + 4, f'{v:.3g}', size)
        for v in (self.y0, self.y1):
            svg.text(self.left - 4, self.y(v) + size / 3, f'{v:.3g}', size, anchor='end')
        svg.text((self.left + self.right) / 2, self.style['height'] - 8, x_label, size)
        svg.text(12, (self.top + self.bottom) / 2, y_label, size)
        if self.style.get('title'):
            svg.text((self.left + self.right) / 2, self.top - 6, self.style['title'], size + 1)


def _padded(bounds: Tuple[float, float]) -> Tuple[float, float]:
    lo, hi = float(bounds[0]), float(bounds[1])
    if hi - lo < 1e-12:
        return lo - 0.5, hi + 0.5
    return lo, hi


def _style(style: Optional[Dict]) -> Dict:
    merged = dict(DEFAULT_STYLE)
    merged.update(style or {})
    return merged


def _color(t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    for (a, ca), (b, cb) in zip(COLOR_STOPS, COLOR_STOPS[1:]):
        if t <= b:
            w = (t - a) / (b - a)
            rgb = [round(ca[i] + w * (cb[i] - ca[i])) for i in range(3)]
            return '#{:02x}{:02x}{:02x}'.format(*rgb)
    return '#{:02x}{:02x}{:02x}'.format(*COLOR_STOPS[-1][1])


def _support_runs(supported: np.ndarray) -> List[Tuple[int, int, bool]]:
    """
    把曲线拆成连续段：相邻两个网格点都有支撑的区间为实线段，其余为虚线段

    Returns:
        List: (起点下标, 终点下标, 是否有支撑)
    """
    segments = supported[:-1] & supported[1:]
    runs = []
    start = 0
    for k in range(1, segments.size + 1):
        if k == segments.size or segments[k] != segments[start]:
            runs.append((start, k, bool(segments[start])))
            start = k
    return runs


def _render_curve(curve: EffectCurve, style: Dict) -> str:
    values = curve.curve_matrix()
    if values.shape[0] == 0:
        raise DataError("曲线为空，无法渲染")
    support = curve.support_matrix()
    frame = _Frame(style, (curve.grid[0], curve.grid[-1]), (values.min(), values.max()))
    svg = SVG()
    svg.header(style['width'], style['height'])
    frame.draw_axes(svg, curve.name or f'feature {curve.feature}', 'prediction')
    xs = [frame.x(v) for v in curve.grid]
    for row, mask in zip(values, support):
        points = list(zip(xs, (frame.y(v) for v in row)))
        if len(points) == 1:
            svg.circle(points[0][0], points[0][1], style['point_radius'], style['stroke'])
            continue
        for start, end, supported in _support_runs(mask):
            svg.polyline(points[start:end + 1], style['stroke'], style['stroke_width'], dashed=not supported)
    return svg.get_svg()


def _render_ranks(table: RankTable, style: Dict) -> str:
    if table.ranks.size == 0:
        raise DataError("排名表为空，无法渲染")
    p = len(table.names)
    frame = _Frame(style, (0.5, p + 0.5), (0.5, p + 0.5))
    svg = SVG()
    svg.header(style['width'], style['height'])
    frame.draw_axes(svg, 'feature', f'mean rank ({table.measure})')
    for j, (name, rank) in enumerate(zip(table.names, table.mean_ranks)):
        svg.circle(frame.x(j + 1), frame.y(rank), style['point_radius'], style['stroke'])
        svg.text(frame.x(j + 1), frame.bottom + 2 * style['font_size'] + 6, name, style['font_size'])
    return svg.get_svg()


def _render_field(field: GridField, style: Dict) -> str:
    values = field.sd if style['field'] == 'sd' else field.mean
    if values.size == 0:
        raise DataError("预测场为空，无法渲染")
    (lo1, hi1), (lo2, hi2) = field.bounds
    frame = _Frame(style, (lo1, hi1), (lo2, hi2))
    svg = SVG()
    svg.header(style['width'], style['height'])
    vmin, vmax = float(values.min()), float(values.max())
    scale = vmax - vmin if vmax > vmin else 1.0
    a1, a2 = field.axes
    dx = (a1[1] - a1[0]) / 2
    dy = (a2[1] - a2[0]) / 2
    for r, v2 in enumerate(a2):
        for c, v1 in enumerate(a1):
            svg.filled_rectangle(frame.x(v1 - dx), frame.y(v2 + dy), frame.x(v1 + dx), frame.y(v2 - dy),
                                 _color((values[r, c] - vmin) / scale))
    if field.training_points is not None:
        for x1, x2 in np.asarray(field.training_points)[:, :2]:
            svg.circle(frame.x(x1), frame.y(x2), 1.5, '#ffffff')
    frame.draw_axes(svg, 'x1', 'x2')
    return svg.get_svg()


def render_svg(artifact, style: Optional[Dict] = None) -> str:
    """
    渲染排名表 / 效应曲线 / 预测场为独立 SVG 文档

    Raises:
        DataError: 空对象或不支持的类型
    """
    style = _style(style)
    if isinstance(artifact, EffectCurve):
        return _render_curve(artifact, style)
    if isinstance(artifact, RankTable):
        return _render_ranks(artifact, style)
    if isinstance(artifact, GridField):
        return _render_field(artifact, style)
    raise DataError(f"不支持渲染的对象类型: {type(artifact).__name__}")


def render_rank_pairs(names: Sequence[str], x_ranks, y_ranks, x_label: str, y_label: str,
                      style: Optional[Dict] = None) -> str:
    """两组排名的配对散点图（对角线表示一致）"""
    style = _style(style)
    x_ranks = np.asarray(x_ranks, dtype=np.float64)
    y_ranks = np.asarray(y_ranks, dtype=np.float64)
    if x_ranks.size == 0 or x_ranks.shape != y_ranks.shape:
        raise DataError("配对排名为空或长度不一致")
    p = len(names)
    frame = _Frame(style, (0.5, p + 0.5), (0.5, p + 0.5))
    svg = SVG()
    svg.header(style['width'], style['height'])
    frame.draw_axes(svg, x_label, y_label)
    svg.line(frame.x(0.5), frame.y(0.5), frame.x(p + 0.5), frame.y(p + 0.5), stroke='#999999')
    for name, xr, yr in zip(names, x_ranks, y_ranks):
        svg.circle(frame.x(xr), frame.y(yr), style['point_radius'], style['stroke'])
        svg.text(frame.x(xr) + 5, frame.y(yr) - 5, name, style['font_size'], anchor='start')
    return svg.get_svg()


def write_svg(document: str, path) -> None:
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(document)


def render_series(x, series: Dict[str, Sequence[float]], x_label: str, y_label: str,
                  style: Optional[Dict] = None) -> str:
    """同一 x 轴上的多条折线，标签写在各自末端"""
    style = _style(style)
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0 or not series:
        raise DataError("折线数据为空")
    values = np.vstack([np.asarray(v, dtype=np.float64) for v in series.values()])
    if values.shape[1] != x.size:
        raise DataError("折线长度与 x 轴长度不一致")
    frame = _Frame(style, (x.min(), x.max()), (values.min(), values.max()))
    svg = SVG()
    svg.header(style['width'], style['height'])
    frame.draw_axes(svg, x_label, y_label)
    for label, row in zip(series.keys(), values):
        points = [(frame.x(a), frame.y(b)) for a, b in zip(x, row)]
        if len(points) > 1:
            svg.polyline(points, style['stroke'], style['stroke_width'])
        for px, py in points:
            svg.circle(px, py, style['point_radius'] / 2, style['stroke'])
        svg.text(points[-1][0] + 4, points[-1][1], label, style['font_size'], anchor='start')
    return svg.get_svg()


def render_scatter(x, y, x_label: str, y_label: str, style: Optional[Dict] = None,
                   highlight=None) -> str:
    """散点图；highlight 中的点用红色标出"""
    style = _style(style)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size == 0 or x.shape != y.shape:
        raise DataError("散点数据为空或长度不一致")
    frame = _Frame(style, (x.min(), x.max()), (y.min(), y.max()))
    svg = SVG()
    svg.header(style['width'], style['height'])
    frame.draw_axes(svg, x_label, y_label)
    for a, b in zip(x, y):
        svg.circle(frame.x(a), frame.y(b), style['point_radius'] / 2, style['stroke'])
    for a, b in (highlight if highlight is not None else []):
        svg.circle(frame.x(a), frame.y(b), style['point_radius'], '#c0392b')
    return svg.get_svg()

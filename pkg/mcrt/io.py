"""
读写与绘图。

功能概要：
- 路径对：CSV（首行为 # 注释头）与 .npz 列存档
- 图：边表 CSV（i,j,side,is_boundary_i,is_boundary_j），可无损读回
- JSON：键排序、缩进 2、ensure_ascii=False；numpy 标量/数组自动转换
- 表格：pandas 写 CSV / xlsx
- 绘图：BeautifulSoup 生成嵌入 SVG（边、顶点、高亮的边界多边形）；matplotlib 生成双对数散点 + 拟合线 SVG

所有写操作先写同目录临时文件，再 os.replace 原子替换。
"""

import hashlib
import json
import logging
import os
import tempfile
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from bs4 import BeautifulSoup  # noqa: E402

from .base import SIDE_NAMES, Embedding, HarmonicSolution, MatedCrtGraph, PathPair, side_code  # noqa: E402
from .errors import DomainError  # noqa: E402

SVG_NS = "http://www.w3.org/2000/svg"
XML_DECLARATION = '<?xml version="1.0" encoding="UTF-8"?>\n'
TABLE_FORMATS = ("csv", "xlsx")


@contextmanager
def atomic_path(path: str) -> Iterator[str]:
    """产出同目录下的临时文件路径；正常退出时替换目标文件，异常时删除临时文件。"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    suffix = os.path.splitext(path)[1]
    fd, tmp = tempfile.mkstemp(prefix=".tmp_", suffix=suffix, dir=directory)
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def write_text(path: str, text: str) -> None:
    with atomic_path(path) as tmp:
        with open(tmp, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f"无法序列化为 JSON：{type(value).__name__}")


def dumps_json(data: Any) -> str:
    return json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_json(path: str, data: Any) -> None:
    write_text(path, dumps_json(data))


def read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def input_hash(parameters: Dict[str, Any], seed: int) -> str:
    """参数与主种子的规范 JSON 的 SHA256。"""
    canonical = json.dumps(
        {"parameters": parameters, "seed": int(seed)},
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=True,
        default=_json_default,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_frame(path: str, frame: pd.DataFrame) -> None:
    """按扩展名写 CSV 或 xlsx（不含索引）。"""
    ext = os.path.splitext(path)[1].lower()
    with atomic_path(path) as tmp:
        if ext == ".xlsx":
            frame.to_excel(tmp, index=False, engine="openpyxl")
        elif ext == ".csv":
            frame.to_csv(tmp, index=False, encoding="utf-8", lineterminator="\n")
        else:
            raise DomainError(f"不支持的表格格式：{path}")


def write_tables(base_path: str, frame: pd.DataFrame, formats: Sequence[str]) -> List[str]:
    """把同一张表写成 formats 中的各种表格格式，返回写出的路径。"""
    written = []
    for fmt in formats:
        if fmt in TABLE_FORMATS:
            path = f"{base_path}.{fmt}"
            write_frame(path, frame)
            written.append(path)
    return written


# ---------- 路径对 ----------

_PATH_HEADER_KEYS = ("kind", "gamma", "correlation", "mesh", "horizon", "seed")


def _path_header(path: PathPair) -> Dict[str, Any]:
    return {
        "kind": path.kind,
        "gamma": path.gamma,
        "correlation": path.correlation,
        "mesh": path.mesh,
        "horizon": path.horizon,
        "seed": path.seed,
    }


def _path_from_header(header: Dict[str, Any], samples_l: np.ndarray, samples_r: np.ndarray) -> PathPair:
    missing = [k for k in _PATH_HEADER_KEYS if k not in header]
    if missing:
        raise DomainError(f"路径文件缺少头部字段：{missing}")
    return PathPair(
        gamma=float(header["gamma"]),
        correlation=float(header["correlation"]),
        mesh=float(header["mesh"]),
        horizon=float(header["horizon"]),
        samples_l=samples_l,
        samples_r=samples_r,
        seed=int(header["seed"]),
        kind=str(header["kind"]),
    )


def write_path_csv(path: str, pair: PathPair) -> None:
    """列 time,L,R；首行注释保存生成参数。"""
    header = " ".join(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in _path_header(pair).items())
    frame = pd.DataFrame({"time": pair.times, "L": pair.samples_l, "R": pair.samples_r})
    body = frame.to_csv(index=False, lineterminator="\n", float_format="%.17g")
    write_text(path, f"# {header}\n{body}")


def read_path_csv(path: str) -> PathPair:
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline()
    if not first.startswith("#"):
        raise DomainError(f"路径 CSV 缺少注释头：{path}")
    header = dict(item.split("=", 1) for item in first[1:].split())
    frame = pd.read_csv(path, comment="#", float_precision="round_trip")
    return _path_from_header(header, frame["L"].to_numpy(float), frame["R"].to_numpy(float))


def write_path_npz(path: str, pair: PathPair) -> None:
    with atomic_path(path) as tmp:
        with open(tmp, "wb") as f:
            np.savez(f, L=pair.samples_l, R=pair.samples_r, header=np.array(dumps_json(_path_header(pair))))


def read_path_npz(path: str) -> PathPair:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        return _path_from_header(header, data["L"], data["R"])


# ---------- 图 ----------


def edge_frame(graph: MatedCrtGraph) -> pd.DataFrame:
    flags = graph.boundary_flags.astype(int)
    return pd.DataFrame(
        {
            "i": graph.edge_i,
            "j": graph.edge_j,
            "side": [SIDE_NAMES[s] for s in graph.edge_side.tolist()],
            "is_boundary_i": flags[graph.edge_i],
            "is_boundary_j": flags[graph.edge_j],
        }
    )


def write_graph_csv(path: str, graph: MatedCrtGraph) -> None:
    """边表 (i, j, side, is_boundary_i, is_boundary_j)，每条边（含重边）一行。"""
    write_frame(path, edge_frame(graph))


def read_graph_csv(path: str, count: Optional[int] = None) -> MatedCrtGraph:
    """读回图；顶点数缺省取最大端点 + 1，边界标记取自两列 is_boundary_*。"""
    edges = pd.read_csv(path, dtype={"i": np.int64, "j": np.int64, "side": str})
    missing = {"i", "j", "side"} - set(edges.columns)
    if missing:
        raise DomainError(f"边表缺少列：{sorted(missing)}")
    if count is None:
        count = int(max(edges["i"].max(), edges["j"].max()) + 1) if len(edges) else 0
    flags = None
    if {"is_boundary_i", "is_boundary_j"} <= set(edges.columns):
        flags = np.zeros(count, dtype=bool)
        flags[edges["i"].to_numpy()] = edges["is_boundary_i"].to_numpy().astype(bool)
        flags[edges["j"].to_numpy()] = edges["is_boundary_j"].to_numpy().astype(bool)
    return MatedCrtGraph(
        count=count,
        edge_i=edges["i"].to_numpy(),
        edge_j=edges["j"].to_numpy(),
        edge_side=np.array([side_code(s) for s in edges["side"]], dtype=np.int8),
        boundary_flags=flags,
    )


def solution_frame(solution: HarmonicSolution) -> pd.DataFrame:
    boundary = np.zeros(solution.values.size, dtype=int)
    boundary[list(solution.boundary)] = 1
    return pd.DataFrame({"vertex": np.arange(solution.values.size), "value": solution.values, "boundary": boundary})


def embedding_frame(embedding: Embedding) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "vertex": np.arange(embedding.coords.shape[0]),
            "x": embedding.coords[:, 0],
            "y": embedding.coords[:, 1],
            "pinned": embedding.pinned_mask.astype(int),
        }
    )


# ---------- 绘图 ----------


def render_embedding_svg(graph: MatedCrtGraph, embedding: Embedding, size: int = 800, margin: int = 20) -> str:
    """
    嵌入的 SVG 图。

    边界多边形（钉住顶点按边界顺序）画成高亮的 <polygon class="boundary">；
    每条边（含重边）一条 <line class="edge">，L 边与 R 边颜色不同；每个顶点一个 <circle class="vertex">，
    钉住的顶点另加 class pinned。
    """
    coords = embedding.coords
    low = coords.min(axis=0) if coords.size else np.zeros(2)
    span = float(np.max(coords.max(axis=0) - low)) if coords.size else 1.0
    scale = (size - 2 * margin) / (span or 1.0)
    # SVG 的 y 轴向下
    px = margin + (coords[:, 0] - low[0]) * scale
    py = size - margin - (coords[:, 1] - low[1]) * scale

    soup = BeautifulSoup("", "html.parser")
    svg = soup.new_tag("svg", attrs={"xmlns": SVG_NS, "width": str(size), "height": str(size), "version": "1.1"})
    soup.append(svg)
    if len(embedding.pinned):
        points = " ".join(f"{px[v]:.3f},{py[v]:.3f}" for v in embedding.pinned)
        svg.append(
            soup.new_tag(
                "polygon",
                attrs={
                    "class": "boundary",
                    "points": points,
                    "fill": "#fff4d6",
                    "stroke": "#e08a00",
                    "stroke-width": "2",
                },
            )
        )
    edges = soup.new_tag("g", attrs={"id": "edges", "stroke-width": "0.6"})
    svg.append(edges)
    colors = ("#1f4e9c", "#b8322a")
    for i, j, s in zip(graph.edge_i.tolist(), graph.edge_j.tolist(), graph.edge_side.tolist()):
        edges.append(
            soup.new_tag(
                "line",
                attrs={
                    "class": "edge",
                    "data-side": SIDE_NAMES[s],
                    "x1": f"{px[i]:.3f}",
                    "y1": f"{py[i]:.3f}",
                    "x2": f"{px[j]:.3f}",
                    "y2": f"{py[j]:.3f}",
                    "stroke": colors[s],
                },
            )
        )
    vertices = soup.new_tag("g", attrs={"id": "vertices", "fill": "#222222"})
    svg.append(vertices)
    pinned = embedding.pinned_mask
    for v in range(coords.shape[0]):
        attrs = {"class": "vertex", "cx": f"{px[v]:.3f}", "cy": f"{py[v]:.3f}", "r": "1.2"}
        if pinned[v]:
            attrs.update({"class": "vertex pinned", "r": "2", "fill": "#e08a00"})
        vertices.append(soup.new_tag("circle", attrs=attrs))
    return XML_DECLARATION + str(soup) + "\n"


def write_embedding_svg(path: str, graph: MatedCrtGraph, embedding: Embedding, size: int = 800) -> None:
    write_text(path, render_embedding_svg(graph, embedding, size))
    logging.info("已写出 SVG：%s（%d 条边）", path, graph.edge_count)


def write_loglog_plot(
    path: str,
    x: Sequence[float],
    y: Sequence[float],
    slope: Optional[float] = None,
    intercept: Optional[float] = None,
    xlabel: str = "x",
    ylabel: str = "y",
    title: str = "",
    logx: bool = True,
) -> None:
    """对数散点 + 拟合线（log y = intercept + slope·log x；logx 为 False 时横轴取线性）；输出可复现的 SVG。"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    plt.rcParams["svg.hashsalt"] = "mcrt"
    fig, ax = plt.subplots(figsize=(5, 4))
    try:
        ax.plot(x, y, "o", color="#1f4e9c", label="data")
        ax.set_yscale("log")
        if logx:
            ax.set_xscale("log")
        if slope is not None and intercept is not None and x.size:
            if logx:
                grid = np.geomspace(x.min(), x.max(), 50)
                fitted = np.exp(intercept) * grid**slope
            else:
                grid = np.linspace(x.min(), x.max(), 50)
                fitted = np.exp(intercept + slope * grid)
            ax.plot(grid, fitted, "-", color="#b8322a", label=f"slope {slope:.3f}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        with atomic_path(path) as tmp:
            fig.savefig(tmp, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)

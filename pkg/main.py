"""
命令行入口。

功能概要：
- 读取 YAML 配置（默认 main.py 同目录的 config.yaml），命令行参数优先于配置文件，配置文件优先于内置默认值
- 子命令：sample / build / solve / embed / walk / experiment，每次只执行一个
- 输出先写临时文件再原子替换；相同参数重复运行得到逐字节相同的 CSV / JSON / SVG
- 失败时向 stderr 输出一行 JSON 错误记录，并按异常类型返回退出码
"""

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import yaml

from mcrt.base import PATH_KINDS
from mcrt.errors import DomainError, MatedCrtError, ResourceError
from mcrt.experiments import DEFAULT_GAMMA_GRID, ExperimentReport, default_registry, function_names, get_function
from mcrt.graph import (
    MatedCrtMap,
    build_graph,
    cell_minima,
    check_cell_resolution,
    generate_map,
    interior_center,
    summary,
)
from mcrt.io import (
    edge_frame,
    embedding_frame,
    input_hash,
    read_path_csv,
    read_path_npz,
    solution_frame,
    write_embedding_svg,
    write_frame,
    write_graph_csv,
    write_json,
    write_loglog_plot,
    write_path_csv,
    write_path_npz,
    write_tables,
)
from mcrt.laplace import circle_embedding, count_crossings, dirichlet_energy, harmonic_extend
from mcrt.paths import bm_correlation, grid_steps, sample_brownian_pair, sample_lattice_walk
from mcrt.rng import THREADS_ENV
from mcrt.walk import BUDGET, exit_time_exact, exit_time_trials, mean_estimate

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_RESOURCE = 4

FORMATS = ("csv", "json", "xlsx", "svg")
SUBCOMMANDS = ("sample", "build", "solve", "embed", "walk", "experiment")
MAP_COMMANDS = ("build", "solve", "embed", "walk")


def runtime_base_dir() -> str:
    """返回运行目录（源码/打包环境均可用）。"""
    if getattr(sys, "frozen", False):
        return os.path.dirname(sys.executable)
    return os.path.dirname(os.path.abspath(__file__))


def resolve_config_path(base_dir: str, path: str) -> str:
    """相对路径则相对于 base_dir 解析，绝对路径原样返回。"""
    if not path or not isinstance(path, str):
        return path
    path = path.strip()
    if os.path.isabs(path):
        return os.path.normpath(path)
    return os.path.normpath(os.path.join(base_dir, path))


def resolve_config_paths(config: Dict[str, Any], base_dir: str) -> None:
    """将 config 中的路径项解析为绝对路径（相对路径相对于 base_dir）。"""
    for key in ("out", "log_path"):
        if key in config and config[key]:
            config[key] = resolve_config_path(base_dir, config[key])


def load_config(path: Optional[str]) -> Dict[str, Any]:
    """读取并解析 YAML 配置文件；文件不存在时返回空配置。"""
    if not path or not os.path.exists(path):
        return {}
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise DomainError(f"配置文件必须是键值映射：{path}")
    return data


def setup_logging(log_path: str) -> None:
    """初始化日志输出与日志文件目录。"""
    os.makedirs(os.path.dirname(log_path), exist_ok=True)
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s [%(levelname)s] %(message)s",
        handlers=[
            logging.FileHandler(log_path, encoding="utf-8"),
            logging.StreamHandler(),
        ],
        force=True,
    )


@dataclass
class RunConfig:
    """一次运行的参数；未设置的字段取这里的默认值。"""

    gamma: float = math.sqrt(2.0)  # LQG 参数
    epsilon: float = 0.01  # 单元宽度
    horizon: float = 1.0  # 时间窗口 T
    mesh: Optional[float] = None  # 网格步长，缺省为 ε/64
    seed: int = 0  # 主种子
    trials: int = 20  # 蒙特卡洛试验次数
    tolerance: float = 1e-9  # 调和延拓残差容差
    min_cell_samples: int = 8  # 布朗路径每个单元至少的网格步数
    kind: str = "brownian"  # brownian / lattice
    max_steps: int = 100_000  # 单次游走的步数上限
    threads: Optional[int] = None  # 写入 MCRT_THREADS（环境变量已设置时不覆盖）
    out: str = "./output"  # 输出目录
    formats: List[str] = field(default_factory=lambda: ["csv", "json"])
    log_path: str = "./output/logs/mcrt.log"

    @classmethod
    def from_sources(cls, file_config: Dict[str, Any], flags: Dict[str, Any]) -> "RunConfig":
        """内置默认值 < 配置文件 < 命令行参数；未知字段忽略。"""
        names = {f.name for f in fields(cls)}
        merged = {k: v for k, v in file_config.items() if k in names and v is not None}
        merged.update({k: v for k, v in flags.items() if k in names and v is not None})
        return cls(**merged)

    @classmethod
    def unknown_keys(cls, file_config: Dict[str, Any]) -> List[str]:
        return sorted(set(file_config) - {f.name for f in fields(cls)})

    def validate(self) -> None:
        """在开始任何计算之前校验全部数值参数。"""
        bm_correlation(self.gamma)
        for name in ("epsilon", "horizon", "tolerance"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
                raise DomainError(f"{name} 必须为正数：{value}")
        if self.mesh is not None and not (self.mesh > 0 and math.isfinite(self.mesh)):
            raise DomainError(f"mesh 必须为正数：{self.mesh}")
        for name in ("trials", "max_steps", "min_cell_samples"):
            if int(getattr(self, name)) < 1:
                raise DomainError(f"{name} 必须 ≥ 1：{getattr(self, name)}")
        if self.kind not in PATH_KINDS:
            raise DomainError(f"未知的路径类型：{self.kind}")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise DomainError(f"未知的输出格式：{bad}（可选：{', '.join(FORMATS)}）")
        if self.threads is not None and int(self.threads) < 1:
            raise DomainError(f"threads 必须 ≥ 1：{self.threads}")

    def validate_grid(self, cells: bool = True) -> None:
        """采样之前校验网格：mesh 整除 horizon；cells 为真时再校验 ε 的单元分辨率。"""
        if self.kind == "brownian":
            grid_steps(self.horizon, self.effective_mesh)
        if cells:
            check_cell_resolution(self.epsilon, self.effective_mesh, self.horizon, self.kind, self.min_cell_samples)

    @property
    def effective_mesh(self) -> float:
        if self.kind == "lattice":
            return 1.0
        return self.mesh if self.mesh is not None else self.epsilon / 64.0

    def map_parameters(self) -> Dict[str, Any]:
        return {
            "gamma": self.gamma,
            "epsilon": self.epsilon,
            "horizon": self.horizon,
            "mesh": self.effective_mesh,
            "kind": self.kind,
            "min_cell_samples": self.min_cell_samples,
        }


class UsageError(Exception):
    """命令行语法错误。"""


class CliParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"不是数值列表：{text}") from None


def _int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"不是整数列表：{text}") from None


def _common_flags(default: Any) -> CliParser:
    """子命令前后都可写的参数；子命令一侧用 SUPPRESS，未给出时不覆盖子命令前的值。"""
    common = CliParser(add_help=False)
    common.add_argument("--config", default=default, help="YAML 配置文件路径（默认 main.py 同目录的 config.yaml）")
    common.add_argument("--log-path", dest="log_path", default=default, help="日志文件路径")
    common.add_argument(
        "--format",
        dest="formats",
        action="append",
        choices=FORMATS,
        default=default,
        help="输出格式，可重复：csv json xlsx svg",
    )
    common.add_argument("--seed", type=int, default=default, help="主种子")
    common.add_argument("--out", default=default, help="输出文件或目录")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags(argparse.SUPPRESS)

    map_flags = CliParser(add_help=False)
    map_flags.add_argument("--gamma", type=float, default=None, help="LQG 参数 γ ∈ (0,2)")
    map_flags.add_argument("--epsilon", type=float, default=None, help="单元宽度 ε")
    map_flags.add_argument("--horizon", type=float, default=None, help="时间窗口 T")
    map_flags.add_argument("--mesh", type=float, default=None, help="网格步长（缺省 ε/64）")
    map_flags.add_argument("--kind", choices=PATH_KINDS, default=None, help="路径类型")
    map_flags.add_argument("--min-cell-samples", dest="min_cell_samples", type=int, default=None)
    map_flags.add_argument("--path", dest="path_file", default=None, help="读取已保存的路径（.csv / .npz）代替采样")
    map_flags.add_argument("--tolerance", type=float, default=None, help="调和延拓残差容差")

    parser = CliParser(prog="mcrt", description="mated-CRT 随机平面图模拟", parents=[_common_flags(None)])
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    sub.required = True

    sample = sub.add_parser("sample", parents=[common], help="采样路径对")
    sample.add_argument("--kind", choices=PATH_KINDS, default=None)
    sample.add_argument("--gamma", type=float, default=None)
    sample.add_argument("--horizon", type=float, default=None)
    sample.add_argument("--mesh", type=float, default=None)
    sample.add_argument("--steps", type=int, default=None, help="格点游走步数")

    sub.add_parser("build", parents=[common, map_flags], help="构造 mated-CRT 图")

    solve = sub.add_parser("solve", parents=[common, map_flags], help="单位圆边界数据的调和延拓")
    solve.add_argument("--function", default="re", help=f"测试函数：{', '.join(function_names())}")
    solve.add_argument("--chi", type=float, default=0.5, help="holder 函数的指数")

    embed = sub.add_parser("embed", parents=[common, map_flags], help="单位圆 Tutte 嵌入")
    embed.add_argument("--svg", default=None, help="SVG 输出路径")
    embed.add_argument("--max-crossing-edges", dest="max_crossing_edges", type=int, default=20000)

    walk = sub.add_parser("walk", parents=[common, map_flags], help="从内部出发的离开时间")
    walk.add_argument("--start", type=int, default=None, help="起点（缺省为窗口中心的内部顶点）")
    walk.add_argument("--max-steps", dest="max_steps", type=int, default=None)
    walk.add_argument("--trials", type=int, default=None)

    experiment = sub.add_parser("experiment", parents=[common], help="运行尺度实验")
    experiment.add_argument("name", help=f"实验名：{', '.join(default_registry().names())}")
    experiment.add_argument("--gamma", type=float, default=None)
    experiment.add_argument("--gamma-grid", dest="gamma_grid", action="store_true", help="依次运行默认 γ 网格")
    experiment.add_argument("--samples", type=int, default=None)
    experiment.add_argument("--window", type=int, default=None)
    experiment.add_argument("--sizes", type=_int_list, default=None)
    experiment.add_argument("--epsilons", type=_float_list, default=None)
    experiment.add_argument("--epsilon", type=float, default=None)
    experiment.add_argument("--trials", type=int, default=None)
    experiment.add_argument("--function", default=None)
    experiment.add_argument("--chi", type=float, default=None)
    experiment.add_argument("--factors", type=_int_list, default=None)
    experiment.add_argument("--radii", type=_int_list, default=None)
    experiment.add_argument("--radius", type=float, default=None, help="max-edge：只统计 |z| ≤ radius 内的边")
    experiment.add_argument("--cells", type=int, default=None)
    experiment.add_argument("--n-max", dest="n_max", type=int, default=None)
    experiment.add_argument("--pairs", type=int, default=None)
    experiment.add_argument("--horizon", type=float, default=None)
    experiment.add_argument("--kind", choices=PATH_KINDS, default=None)
    experiment.add_argument("--quantile", type=float, default=None)
    experiment.add_argument("--max-steps", dest="max_steps", type=int, default=None)
    experiment.add_argument("--mesh-divisor", dest="mesh_divisor", type=int, default=None)
    return parser


def _stem(path: str) -> str:
    return os.path.splitext(path)[0]


def _output_file(cfg: RunConfig, out: Optional[str], default_name: str) -> str:
    """--out 给出文件时直接使用；给出目录或缺省时放在输出目录下。"""
    if out and os.path.splitext(out)[1]:
        return resolve_config_path(os.getcwd(), out)
    directory = resolve_config_path(os.getcwd(), out) if out else cfg.out
    return os.path.join(directory, default_name)


def _read_path(path_file: str):
    loader = read_path_npz if path_file.endswith(".npz") else read_path_csv
    return loader(path_file)


def _build_map(cfg: RunConfig, args: argparse.Namespace) -> MatedCrtMap:
    """--path 给出已保存的路径时直接建图，否则按配置采样。"""
    if getattr(args, "path_file", None):
        path = _read_path(args.path_file)
        cells = cell_minima(path, cfg.epsilon, cfg.min_cell_samples)
        return MatedCrtMap(path=path, cells=cells, graph=build_graph(cells))
    return generate_map(
        cfg.gamma,
        cfg.epsilon,
        cfg.horizon,
        cfg.seed,
        mesh=cfg.mesh,
        kind=cfg.kind,
        min_cell_samples=cfg.min_cell_samples,
    )


def _record(cfg: RunConfig, command: str, extra: Dict[str, Any]) -> Dict[str, Any]:
    parameters = cfg.map_parameters()
    data = {
        "command": command,
        "parameters": parameters,
        "seed": cfg.seed,
        "input_hash": input_hash(parameters, cfg.seed),
    }
    data.update(extra)
    return data


def cmd_sample(cfg: RunConfig, args: argparse.Namespace) -> List[str]:
    if cfg.kind == "lattice":
        steps = args.steps if args.steps is not None else int(round(cfg.horizon))
        path = sample_lattice_walk(steps, cfg.seed)
    else:
        path = sample_brownian_pair(cfg.gamma, cfg.horizon, cfg.effective_mesh, cfg.seed)
    target = _output_file(cfg, args.out, "path.csv")
    if target.endswith(".npz"):
        write_path_npz(target, path)
    else:
        write_path_csv(target, path)
    written = [target]
    if "json" in cfg.formats:
        meta = f"{_stem(target)}.json"
        write_json(meta, _record(cfg, "sample", {"samples": path.count, "kind": path.kind}))
        written.append(meta)
    logging.info("路径采样完成：%d 个采样点", path.count)
    return written


def cmd_build(cfg: RunConfig, args: argparse.Namespace) -> List[str]:
    built = _build_map(cfg, args)
    graph = built.graph
    target = _output_file(cfg, args.out, "map.csv")
    write_graph_csv(target, graph)
    written = [target]
    if "xlsx" in cfg.formats:
        written += write_tables(f"{_stem(target)}_edges", edge_frame(graph), ["xlsx"])
    meta = f"{_stem(target)}.json"
    write_json(meta, _record(cfg, "build", {"summary": summary(graph)}))
    written.append(meta)
    logging.info("建图完成：N=%d E=%d", graph.count, graph.edge_count)
    return written


def cmd_solve(cfg: RunConfig, args: argparse.Namespace) -> List[str]:
    test = get_function(args.function, args.chi)
    graph = _build_map(cfg, args).graph
    _, embedding = circle_embedding(graph, tolerance=cfg.tolerance)
    values = test(embedding.pinned_positions)
    solution = harmonic_extend(graph, dict(zip(embedding.pinned, values.tolist())), cfg.tolerance)
    energy = dirichlet_energy(graph, solution.values)
    target = _output_file(cfg, args.out, "solution.csv")
    write_frame(target, solution_frame(solution))
    meta = f"{_stem(target)}.json"
    write_json(
        meta,
        _record(
            cfg,
            "solve",
            {
                "function": test.name,
                "energy": energy,
                "continuum_energy": test.energy,
                "ratio": energy / test.energy if test.energy else None,
                "residual": solution.residual,
                "method": solution.method,
                "maximum_principle": solution.check_maximum_principle(slack=cfg.tolerance),
            },
        ),
    )
    logging.info("调和延拓完成：能量 %.6f（%s）", energy, solution.method)
    return [target, meta]


def cmd_embed(cfg: RunConfig, args: argparse.Namespace) -> List[str]:
    graph = _build_map(cfg, args).graph
    _, embedding = circle_embedding(graph, tolerance=cfg.tolerance)
    target = _output_file(cfg, args.out, "embedding.csv")
    write_frame(target, embedding_frame(embedding))
    written = [target]
    try:
        crossings: Optional[int] = count_crossings(graph, embedding, max_edges=args.max_crossing_edges)
    except ResourceError as exc:
        logging.warning("跳过相交计数：%s", exc)
        crossings = None
    svg_path = args.svg or (f"{_stem(target)}.svg" if "svg" in cfg.formats else None)
    if svg_path:
        write_embedding_svg(svg_path, graph, embedding)
        written.append(svg_path)
    meta = f"{_stem(target)}.json"
    write_json(
        meta,
        _record(
            cfg,
            "embed",
            {
                "crossings": crossings,
                "residual": embedding.residual,
                "boundary_size": len(embedding.pinned),
                "max_edge_length": float(embedding.edge_lengths(graph).max()),
            },
        ),
    )
    written.append(meta)
    return written


def cmd_walk(cfg: RunConfig, args: argparse.Namespace) -> List[str]:
    graph = _build_map(cfg, args).graph
    start = interior_center(graph) if args.start is None else args.start
    region = np.flatnonzero(~graph.boundary_flags)
    log = exit_time_trials(graph, start, region, cfg.trials, cfg.seed, cfg.max_steps)
    exhausted = int(np.sum(log.outcome == BUDGET))
    estimate = mean_estimate(log.steps, cfg.seed, budget_exhausted=exhausted, start=int(start))
    exact = exit_time_exact(graph, start, region)
    target = _output_file(cfg, args.out, "walk.csv")
    write_frame(target, log.to_frame())
    meta = f"{_stem(target)}.json"
    extra = {"estimate": estimate.to_dict(), "exact_exit_time": exact, "trials": cfg.trials, "max_steps": cfg.max_steps}
    write_json(meta, _record(cfg, "walk", extra))
    logging.info("离开时间：MC %.3f ± %.3f，精确 %.3f", estimate.mean, estimate.stderr, exact)
    return [target, meta]


EXPERIMENT_OPTIONS = (
    "samples",
    "window",
    "sizes",
    "epsilons",
    "epsilon",
    "trials",
    "function",
    "chi",
    "factors",
    "radii",
    "radius",
    "cells",
    "n_max",
    "pairs",
    "horizon",
    "kind",
    "quantile",
    "max_steps",
    "mesh_divisor",
)


def write_report(report: ExperimentReport, directory: str, stem: str, formats: Sequence[str]) -> List[str]:
    """报告 JSON（不含运行时间）+ 可选表格与对数图。"""
    written = []
    base = os.path.join(directory, stem)
    if "json" in formats or not formats:
        write_json(f"{base}.json", report.to_dict())
        written.append(f"{base}.json")
    written += write_tables(base, report.to_frame(), formats)
    if "svg" in formats and report.plot and report.rows:
        x = [r.get(report.plot.x) for r in report.rows]
        y = [r.get(report.plot.y) for r in report.rows]
        if all(v is not None and v > 0 for v in y) and (not report.plot.logx or all(v > 0 for v in x)):
            fit = report.fit if report.plot.show_fit else None
            write_loglog_plot(
                f"{base}.svg",
                x,
                y,
                slope=fit.slope if fit else None,
                intercept=fit.intercept if fit else None,
                xlabel=report.plot.xlabel,
                ylabel=report.plot.ylabel,
                title=report.name,
                logx=report.plot.logx,
            )
            written.append(f"{base}.svg")
        else:
            logging.warning("跳过对数图：%s 含非正值", report.name)
    return written


def cmd_experiment(cfg: RunConfig, args: argparse.Namespace) -> List[str]:
    registry = default_registry()
    experiment = registry.require(args.name)
    options = {key: getattr(args, key) for key in EXPERIMENT_OPTIONS}
    options["seed"] = cfg.seed
    directory = resolve_config_path(os.getcwd(), args.out) if args.out else cfg.out
    gammas = list(DEFAULT_GAMMA_GRID) if args.gamma_grid else [args.gamma]
    written: List[str] = []
    for gamma in gammas:
        report = registry.run(experiment.name, gamma=gamma, **options)
        stem = experiment.name if not args.gamma_grid else f"{experiment.name}_gamma{gamma:.4f}"
        written += write_report(report, directory, stem, cfg.formats)
        if report.gating and report.passed is False:
            logging.warning("实验 %s 未通过：%s", experiment.name, report.criterion)
    return written


COMMANDS = {
    "sample": cmd_sample,
    "build": cmd_build,
    "solve": cmd_solve,
    "embed": cmd_embed,
    "walk": cmd_walk,
    "experiment": cmd_experiment,
}


def _error_record(kind: str, message: str, command: Optional[str]) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "command": command}, ensure_ascii=False) + "\n")


def run(argv: Optional[Sequence[str]] = None) -> int:
    """执行一个子命令并返回退出码。"""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        _error_record("usage_error", str(exc), None)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    command = args.command
    base_dir = runtime_base_dir()
    logging_ready = False
    try:
        config_path = args.config or os.path.join(base_dir, "config.yaml")
        if args.config and not os.path.exists(args.config):
            raise DomainError(f"配置文件不存在：{args.config}")
        file_config = load_config(config_path)
        resolve_config_paths(file_config, os.path.dirname(os.path.abspath(config_path)))
        flags = {k: v for k, v in vars(args).items() if k not in ("config", "out")}
        if flags.get("log_path"):
            flags["log_path"] = resolve_config_path(os.getcwd(), flags["log_path"])
        cfg = RunConfig.from_sources(file_config, flags)
        cfg.out = resolve_config_path(base_dir, cfg.out)
        cfg.log_path = resolve_config_path(base_dir, cfg.log_path)
        cfg.validate()
        if command == "sample":
            cfg.validate_grid(cells=False)
        elif command in MAP_COMMANDS and not getattr(args, "path_file", None):
            cfg.validate_grid()
        if cfg.threads:
            os.environ.setdefault(THREADS_ENV, str(cfg.threads))
        setup_logging(cfg.log_path)
        logging_ready = True
        logging.info("-" * 80)
        unknown = RunConfig.unknown_keys(file_config)
        if unknown:
            logging.warning("配置文件中有未知字段，已忽略：%s", ", ".join(unknown))
        logging.info("子命令 %s：%s", command, asdict(cfg))
        written = COMMANDS[command](cfg, args)
        for path in written:
            logging.info("已写出：%s", path)
        return EXIT_OK
    except DomainError as exc:
        if logging_ready:
            logging.error("前置条件不满足：%s", exc)
        _error_record(exc.kind, str(exc), command)
        return EXIT_DOMAIN
    except ResourceError as exc:
        if logging_ready:
            logging.error("超出规模上限：%s", exc)
        _error_record(exc.kind, str(exc), command)
        return EXIT_RESOURCE
    except MatedCrtError as exc:
        if logging_ready:
            logging.error("运行失败：%s", exc)
        _error_record(exc.kind, str(exc), command)
        return EXIT_ERROR
    except Exception as exc:
        if logging_ready:
            logging.exception("未预期的错误")
        _error_record("internal_error", f"{type(exc).__name__}: {exc}", command)
        return EXIT_ERROR


def main() -> None:
    """命令行入口。"""
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()

"""Suite configuration: nested YAML with defaults, strict keys and line-numbered errors."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, is_dataclass

import yaml

BACKENDS = ("jet", "fd", "both")


class ConfigError(ValueError):
    pass


@dataclass
class CheegerConfig:
    scale: float = 1.0


@dataclass
class WarpConfig:
    coefficients: list = field(default_factory=list)


@dataclass
class ConnectionConfig:
    base_map: str = "identity"
    dilation: float = 1.0
    rotation_axis: list = field(default_factory=lambda: [0.0, 0.0, 1.0])
    rotation_angle: float = 0.0


@dataclass
class SampleConfig:
    soul_points: int = 50
    theta_grid: int = 50
    loops: int = 6
    loop_radius: float = 1.0
    normals: int = 20
    frames: int = 40
    geodesics: int = 10
    geodesic_samples: int = 9
    sectional_points: int = 100
    sectional_restarts: int = 8
    audit_points: int = 3
    audit_samples: int = 20000
    backend_points: int = 20
    lambda_grid: int = 41
    vertical_planes: int = 200


@dataclass
class Tolerances:
    gauss: float = 1e-6
    gauss_spread: float = 1e-7
    second_fundamental: float = 1e-8
    cheeger_matrix: float = 1e-10
    killing_block: float = 1e-12
    fibre_metric: float = 1e-10
    horizontal: float = 1e-10
    normal_norm: float = 1e-6
    kernel: float = 1e-8
    loop_relative: float = 1e-3
    loop_order: float = 0.1
    holonomy_angle: float = 1e-4
    vertical: float = 1e-6
    connection_norm: float = 1e-8
    parallel_transport: float = 1e-6
    derivative_identity: float = 1e-8
    gap: float = 1e-5
    argmin_plane: float = 1e-3
    nullity: float = 1e-6
    functional: float = 1e-4
    scalars: float = 1e-5
    lemma_w: float = 1e-4
    sectional: float = 1e-6
    audit: float = 1e-4
    backend_relative: float = 1e-5


@dataclass
class ReportConfig:
    indeterminate_allowance: int = 0
    record_time: bool = False


@dataclass
class SuiteConfig:
    family: str = "cheeger_so3"
    cheeger: CheegerConfig = field(default_factory=CheegerConfig)
    warp: WarpConfig = field(default_factory=WarpConfig)
    backend: str = "jet"
    seed: int | None = 0
    samples: SampleConfig = field(default_factory=SampleConfig)
    tolerances: Tolerances = field(default_factory=Tolerances)
    connection: ConnectionConfig = field(default_factory=ConnectionConfig)
    report: ReportConfig = field(default_factory=ReportConfig)

    def to_dict(self) -> dict:
        return asdict(self)


_COMMENTS = {
    "family": "metric family: product | cheeger_so3",
    "cheeger": "Cheeger deformation parameter (the example uses 1)",
    "warp": "fibre profile (phi(r)/r)^2 = 1 + c1 r^2 + c2 r^4 + ...; empty list is flat R^3",
    "backend": "derivative backend for curvature checks: jet | fd | both",
    "seed": "seed for every sampled point, loop and direction (every command needs one)",
    "samples": "sample counts",
    "tolerances": "absolute unless the check says otherwise; 0 forces floating checks to fail",
    "connection": "base map of the R^3-bundle connection family: identity | rotation | dilation",
    "report": "indeterminate checks tolerated before the exit status turns nonzero",
}


def _scalar(value) -> str:
    return yaml.safe_dump(value, default_flow_style=True, width=1_000_000).strip().removesuffix("\n...").strip()


def default_config_text() -> str:
    """Commented YAML dump of every default."""
    lines = []
    for key, value in SuiteConfig().to_dict().items():
        lines.append(f"# {_COMMENTS[key]}")
        if isinstance(value, dict):
            lines.append(f"{key}:")
            lines.extend(f"  {k}: {_scalar(v)}" for k, v in value.items())
        else:
            lines.append(f"{key}: {_scalar(value)}")
    return "\n".join(lines) + "\n"


def _mark(node) -> str:
    return f"line {node.start_mark.line + 1}"


def _build(cls, node, path: str):
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{_mark(node)}: '{path}' must be a mapping")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for knode, vnode in node.value:
        key = knode.value
        where = f"{path}.{key}" if path else key
        if key not in known:
            raise ConfigError(f"{_mark(knode)}: unknown key '{where}'")
        f = known[key]
        default = getattr(cls(), key)
        if is_dataclass(default):
            kwargs[key] = _build(type(default), vnode, where)
            continue
        value = yaml.safe_load(yaml.serialize(vnode))
        kwargs[key] = _coerce(value, default, f, where, vnode)
    return cls(**kwargs)


def _plain_float(value, node):
    """YAML 1.1 reads unquoted ``1e-6`` as a string; take it as a number."""
    if isinstance(value, str) and isinstance(node, yaml.ScalarNode) and node.style is None:
        try:
            return float(value)
        except ValueError:
            return value
    return value


def _coerce(value, default, f, where, node):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{_mark(node)}: '{where}' must be true or false")
        return value
    if f.name == "seed":
        if value is None:
            return None
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{_mark(node)}: '{where}' must be an integer")
        return value
    if isinstance(default, int):
        if not isinstance(value, int) or isinstance(value, bool) or value < 0:
            raise ConfigError(f"{_mark(node)}: '{where}' must be a nonnegative integer")
        return value
    if isinstance(default, float):
        value = _plain_float(value, node)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{_mark(node)}: '{where}' must be a number")
        return float(value)
    if isinstance(default, list):
        if isinstance(value, list) and isinstance(node, yaml.SequenceNode):
            value = [_plain_float(v, n) for v, n in zip(value, node.value)]
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{_mark(node)}: '{where}' must be a list of numbers")
        return [float(v) for v in value]
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{_mark(node)}: '{where}' must be a string")
        return value
    return value


def _validate(cfg: SuiteConfig, root) -> None:
    def where(*keys):
        node = root
        for k in keys:
            if not isinstance(node, yaml.MappingNode):
                break
            match = [v for kn, v in node.value if kn.value == k]
            if not match:
                break
            node = match[0]
        return _mark(node) if node is not None else "config"

    if cfg.family not in ("product", "cheeger_so3"):
        raise ConfigError(f"{where('family')}: family must be product or cheeger_so3, got {cfg.family!r}")
    if cfg.backend not in BACKENDS:
        raise ConfigError(f"{where('backend')}: backend must be one of {BACKENDS}, got {cfg.backend!r}")
    if not cfg.cheeger.scale > 0:
        raise ConfigError(f"{where('cheeger', 'scale')}: 'cheeger.scale' must be positive")
    for f in fields(Tolerances):
        if getattr(cfg.tolerances, f.name) < 0:
            raise ConfigError(f"{where('tolerances', f.name)}: 'tolerances.{f.name}' must be nonnegative")
    if cfg.connection.base_map not in ("identity", "rotation", "dilation"):
        raise ConfigError(f"{where('connection', 'base_map')}: unknown base map {cfg.connection.base_map!r}")
    if not cfg.connection.dilation > 0:
        raise ConfigError(f"{where('connection', 'dilation')}: 'connection.dilation' must be positive")
    if len(cfg.connection.rotation_axis) != 3:
        raise ConfigError(f"{where('connection', 'rotation_axis')}: 'connection.rotation_axis' needs 3 numbers")
    if cfg.samples.sectional_restarts < 8:
        raise ConfigError(f"{where('samples', 'sectional_restarts')}: at least 8 restarts are required")
    if cfg.samples.loops < 6:
        raise ConfigError(f"{where('samples', 'loops')}: at least 6 loops are required")


def parse_config(text: str, source: str = "<config>") -> SuiteConfig:
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: malformed YAML: {exc}") from None
    if root is None:
        cfg = SuiteConfig(seed=None)
        return cfg
    cfg = _build(SuiteConfig, root, "")
    if not any(kn.value == "seed" for kn, _ in root.value):
        cfg.seed = None
    _validate(cfg, root)
    return cfg


def load_config(path: str | None) -> SuiteConfig:
    """Defaults when ``path`` is None; otherwise the file's values over the defaults.

    A file that omits ``seed`` leaves it unset, so scan commands must get one
    from the command line.
    """
    if path is None:
        return SuiteConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path)

"""Instance files, the bundled 5x3 instance, and instance generators."""
import json
from importlib import resources

import numpy as np

from .errors import ParseError, ValidationError
from .model import TRAFFIC_CLASSES, Instance, traffic_class_rates

SCHEMA_VERSION = 1
FIELDS = {
    "schema_version", "description", "m", "n", "lambda", "traffic_classes",
    "assignment", "mu_access", "mu_node", "eps", "labels",
}
PAPER_SHAPED = "paper_shaped_5x3.json"


def _numbers(name, value, shape):
    try:
        a = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"{name}: expected numbers, got {value!r}") from None
    if a.shape != shape:
        raise ValidationError(f"{name}: expected shape {shape}, got {a.shape}")
    bad = ~np.isfinite(a) | (a <= 0)
    if bad.any():
        idx = tuple(int(k) for k in np.argwhere(bad)[0])
        where = "".join(f"[{k}]" for k in idx)
        raise ValidationError(f"{name}{where} must be positive, got {a[idx]!r}")
    return a


def instance_from_dict(data, check=True):
    """Validate an instance-file mapping and build the :class:`Instance`."""
    if not isinstance(data, dict):
        raise ValidationError("instance file must hold a JSON object")
    unknown = sorted(set(data) - FIELDS)
    if unknown:
        raise ValidationError(f"unknown field(s): {', '.join(unknown)}")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ValidationError(
            f"schema_version must be {SCHEMA_VERSION}, got {data.get('schema_version')!r}"
        )
    for key in ("m", "n", "mu_access", "mu_node"):
        if key not in data:
            raise ValidationError(f"missing field {key!r}")
    m, n = data["m"], data["n"]
    if not (isinstance(m, int) and isinstance(n, int) and m > 0 and n > 0):
        raise ValidationError(f"m and n must be positive integers, got {m!r}, {n!r}")

    if ("lambda" in data) == ("assignment" in data):
        raise ValidationError("give exactly one of 'lambda' or 'assignment'")
    if "traffic_classes" in data and "assignment" not in data:
        raise ValidationError("'traffic_classes' needs 'assignment'")
    if "lambda" in data:
        lam = _numbers("lambda", data["lambda"], (m,))
    else:
        table = TRAFFIC_CLASSES
        if "traffic_classes" in data:
            table = {}
            for key, spec in data["traffic_classes"].items():
                try:
                    table[int(key)] = (float(spec["msg_rate"]), float(spec["msg_bytes"]))
                except (KeyError, TypeError, ValueError):
                    raise ValidationError(f"traffic_classes[{key!r}] malformed") from None
        assignment = data["assignment"]
        if not isinstance(assignment, list) or len(assignment) != m:
            raise ValidationError(f"assignment must list {m} class sets")
        lam = np.array([traffic_class_rates(a, table) for a in assignment])
        if np.any(lam <= 0):
            raise ValidationError("every source needs at least one traffic class")
    mu_access = _numbers("mu_access", data["mu_access"], (m, n))
    mu_node = _numbers("mu_node", data["mu_node"], (n,))
    eps = data.get("eps")
    if eps is not None and not (isinstance(eps, (int, float)) and eps > 0):
        raise ValidationError(f"eps must be positive, got {eps!r}")
    return Instance.mm1(lam, mu_access, mu_node, eps=eps, labels=data.get("labels"),
                        origin=dict(data), check=check)


def load_instance(path, check=True):
    """Read and validate an instance file.

    Raises :class:`ParseError` (with line and column) for malformed JSON,
    :class:`ValidationError` for bad fields and
    :class:`~jointcongestion.errors.InfeasibleInstance` when capacities
    cannot carry the offered load.
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    except OSError as e:
        raise ParseError(f"{path}: {e.strerror}") from None
    return instance_from_dict(data, check=check)


def instance_to_dict(inst):
    if inst.origin is not None:
        return dict(inst.origin)
    data = {
        "schema_version": SCHEMA_VERSION,
        "m": inst.m,
        "n": inst.n,
        "lambda": inst.lam.tolist(),
        "mu_access": inst.mu_access.tolist(),
        "mu_node": inst.mu_node.tolist(),
        "eps": inst.eps,
    }
    if inst.labels is not None:
        data["labels"] = inst.labels
    return data


def write_instance(inst, path):
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=2)
        fh.write("\n")


def paper_shaped_instance():
    """The bundled 5-source, 3-node instance.

    Its class assignment and capacities are illustrative choices made for
    this package, not reference values.
    """
    ref = resources.files("jointcongestion") / "data" / PAPER_SHAPED
    with resources.as_file(ref) as path:
        return load_instance(path)


def paper_shaped_path():
    return resources.files("jointcongestion") / "data" / PAPER_SHAPED


def random_instance(rng, m=5, n=3, load=0.5):
    """Random feasible M/M/1 instance with moderate congestion.

    Offered rates are uniform on [0.5, 2]. Path capacities are
    ``lam_i * (2 / n) * U(1, 3)``, so each source could push at least twice
    its rate through its paths. Node capacities spread the total rate at
    utilisation ``load`` (+-20%).
    """
    lam = rng.uniform(0.5, 2.0, m)
    mu_access = lam[:, None] * (2.0 / n) * rng.uniform(1.0, 3.0, (m, n))
    mu_node = rng.uniform(0.8, 1.2, n) * lam.sum() / (n * load)
    return Instance.mm1(lam, mu_access, mu_node)


def symmetric_instance(m, n, lam=1.0, mu_access=3.0, mu_node=3.0):
    """Identical sources and nodes; the optimum splits every row evenly."""
    return Instance.mm1(
        np.full(m, float(lam)), np.full((m, n), float(mu_access)), np.full(n, float(mu_node))
    )

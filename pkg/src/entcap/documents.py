"""JSON documents read and written by the command-line tool.

Complex numbers are ``[re, im]`` pairs and matrices are row-major lists of
rows.  Floats go through ``json`` unchanged, which prints the shortest
representation that reads back to the same double.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, EntcapError, NotUnitary
from .linalg import validate_unitary

LOAD_UNITARY_TOL = 1e-8


class DocumentError(EntcapError, ValueError):
    """Malformed input document; ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


def encode_complex_array(a) -> list:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [encode_complex_array(x) for x in a]


def decode_complex_array(obj, ndim: int, where: str) -> np.ndarray:
    """Inverse of :func:`encode_complex_array` for an ``ndim`` array."""
    try:
        a = np.asarray(obj, dtype=float)
    except (TypeError, ValueError):
        raise DocumentError("expected nested lists of [re, im] pairs", where) from None
    if a.ndim != ndim + 1 or a.shape[-1] != 2:
        raise DocumentError(f"expected a {ndim}-d array of [re, im] pairs, got shape {a.shape}",
                            where)
    if not np.all(np.isfinite(a)):
        raise DocumentError("non-finite entry", where)
    return a[..., 0] + 1j * a[..., 1]


def _read_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DocumentError(f"cannot read file: {exc.strerror}", str(path)) from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"invalid JSON ({exc.msg} at line {exc.lineno})", str(path)) from None
    if not isinstance(obj, dict):
        raise DocumentError("top level must be an object", str(path))
    return obj


def _dims(obj, where: str) -> tuple[int, int]:
    if (not isinstance(obj, (list, tuple)) or len(obj) != 2
            or not all(isinstance(d, int) and not isinstance(d, bool) and d > 0 for d in obj)):
        raise DocumentError("expected two positive integers", where)
    return int(obj[0]), int(obj[1])


@dataclass(frozen=True, eq=False)
class OperatorDocument:
    matrix: np.ndarray
    dims: tuple[int, int] | None = None
    label: str | None = None

    def to_dict(self) -> dict:
        out = {"dims": list(self.dims) if self.dims else None,
               "matrix": encode_complex_array(self.matrix)}
        if self.label is not None:
            out["label"] = self.label
        return out

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def from_dict(cls, obj: dict, where: str = "operator") -> "OperatorDocument":
        if "matrix" not in obj:
            raise DocumentError("missing field", f"{where}.matrix")
        mat = decode_complex_array(obj["matrix"], 2, f"{where}.matrix")
        if mat.shape[0] != mat.shape[1]:
            raise DocumentError(f"matrix of shape {mat.shape} is not square", f"{where}.matrix")
        dims = obj.get("dims")
        if dims is not None:
            dims = _dims(dims, f"{where}.dims")
            if dims[0] * dims[1] != mat.shape[0]:
                raise DimensionMismatch(
                    f"{where}.dims {dims} do not factor matrix dimension {mat.shape[0]}")
        try:
            validate_unitary(mat, LOAD_UNITARY_TOL)
        except NotUnitary as exc:
            raise DocumentError(str(exc), f"{where}.matrix") from None
        label = obj.get("label")
        if label is not None and not isinstance(label, str):
            raise DocumentError("expected a string", f"{where}.label")
        return cls(mat, dims, label)

    @classmethod
    def load(cls, path) -> "OperatorDocument":
        return cls.from_dict(_read_json(path), str(path))


def family_from_dict(obj: dict, where: str = "family"):
    """Build a :class:`~entcap.gco.UnitaryFamily` from a family description:
    ``m``, ``n``, optional ``control_basis`` and ``members`` (builtin names
    or explicit ``n x n`` matrices)."""
    from .gco import FamilyDimensionError, InvalidFamily, UnitaryFamily, named_member

    for key in ("m", "n", "members"):
        if key not in obj:
            raise DocumentError("missing field", f"{where}.{key}")
    m, n = _dims([obj["m"], obj["n"]], f"{where}.m/n")
    members = obj["members"]
    if not isinstance(members, list) or len(members) != m:
        raise DocumentError(f"expected a list of {m} members", f"{where}.members")
    if m > n:
        raise FamilyDimensionError(f"control dimension {m} exceeds target dimension {n}")
    mats = []
    for i, mem in enumerate(members):
        at = f"{where}.members[{i}]"
        if isinstance(mem, str):
            try:
                mats.append(named_member(mem, n))
            except InvalidFamily as exc:
                raise DocumentError(str(exc), at) from None
        else:
            mat = decode_complex_array(mem, 2, at)
            if mat.shape != (n, n):
                raise DimensionMismatch(f"{at} has shape {mat.shape}, expected ({n}, {n})")
            mats.append(mat)
    basis = None
    if obj.get("control_basis") is not None:
        basis = decode_complex_array(obj["control_basis"], 2, f"{where}.control_basis")
        if basis.shape != (m, m):
            raise DimensionMismatch(f"{where}.control_basis has shape {basis.shape}, "
                                    f"expected ({m}, {m})")
    try:
        return UnitaryFamily(mats, basis, name=obj.get("name", ""))
    except FamilyDimensionError:
        raise
    except InvalidFamily as exc:
        raise DocumentError(str(exc), where) from None


def load_family(path):
    return family_from_dict(_read_json(path), str(path))


def to_plain(obj):
    """Convert results into JSON-ready values (complex arrays as pairs)."""
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return encode_complex_array(obj)
        return obj.tolist()
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if obj is None or isinstance(obj, (str, int)):
        return obj
    if hasattr(obj, "__array__"):
        return to_plain(np.asarray(obj))
    raise TypeError(f"cannot serialise {type(obj).__name__}")


@dataclass
class ResultDocument:
    command: list
    label: str | None
    values: dict
    bound_status: str | None = None
    diagnostics: dict = field(default_factory=dict)
    version: str = ""
    seed: int = 0

    def __post_init__(self):
        self.command = to_plain(self.command)
        self.values = to_plain(self.values)
        self.diagnostics = to_plain(self.diagnostics)
        self.bound_status = to_plain(self.bound_status)

    def to_dict(self) -> dict:
        return {"command": self.command, "label": self.label, "values": self.values,
                "bound_status": self.bound_status, "diagnostics": self.diagnostics,
                "version": self.version, "seed": self.seed}

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "ResultDocument":
        obj = json.loads(text)
        missing = {"command", "label", "values"} - set(obj)
        if missing:
            raise DocumentError("missing field", sorted(missing)[0])
        return cls(**{k: obj[k] for k in ("command", "label", "values", "bound_status",
                                           "diagnostics", "version", "seed") if k in obj})

    def __eq__(self, other):
        return isinstance(other, ResultDocument) and self.to_dict() == other.to_dict()

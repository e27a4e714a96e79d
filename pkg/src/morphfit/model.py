"""Linear morphable model: shape synthesis, persistence, synthetic generation.

A face shape is a flat length-3n vector with interleaved vertex layout
(x1, y1, z1, x2, ...). A specific face is the mean shape plus a linear
combination of identity and expression basis columns; per-mode sigma
vectors give the prior scale of each coefficient and drive the Tikhonov
priors in the fitter.

Real licensed face models are deliberately not loadable here; the
synthetic generator produces a model with the same structure (orthonormal
smooth basis fields, geometrically decaying mode scales, landmarks spread
over the front of the head) that is good enough to benchmark fitting
algorithms.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from ._fileio import atomic_write_text
from .errors import InvalidArgumentError, ParseError, ValidationError

__all__ = [
    "MorphableModel",
    "Coefficients",
    "synthesize_shape",
    "landmarks_3d",
    "make_synthetic_model",
    "save_model",
    "load_model",
]


@dataclass(frozen=True)
class MorphableModel:
    """Immutable linear shape model.

    mean_shape        (3n,)       interleaved mean face
    id_basis          (3n, d_id)  identity modes (columns)
    exp_basis         (3n, d_exp) expression modes (columns)
    id_sigma          (d_id,)     per-mode prior scale, > 0
    exp_sigma         (d_exp,)    per-mode prior scale, > 0
    landmark_indices  (K,)        distinct vertex indices of the landmarks
    faces             (F, 3) int or None, used only for OBJ export
    """

    mean_shape: np.ndarray
    id_basis: np.ndarray
    exp_basis: np.ndarray
    id_sigma: np.ndarray
    exp_sigma: np.ndarray
    landmark_indices: np.ndarray
    faces: np.ndarray | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "mean_shape", _farray(self.mean_shape, "mean_shape", ndim=1))
        object.__setattr__(self, "id_basis", _farray(self.id_basis, "id_basis", ndim=2))
        object.__setattr__(self, "exp_basis", _farray(self.exp_basis, "exp_basis", ndim=2))
        object.__setattr__(self, "id_sigma", _farray(self.id_sigma, "id_sigma", ndim=1))
        object.__setattr__(self, "exp_sigma", _farray(self.exp_sigma, "exp_sigma", ndim=1))
        idx = np.asarray(self.landmark_indices)
        if idx.ndim != 1 or idx.size == 0 or not np.issubdtype(idx.dtype, np.integer):
            raise InvalidArgumentError("landmark_indices must be a non-empty 1-D integer array")
        object.__setattr__(self, "landmark_indices", idx.astype(np.int64, copy=True))

        three_n = self.mean_shape.size
        if three_n == 0 or three_n % 3 != 0:
            raise InvalidArgumentError("mean_shape length must be a positive multiple of 3")
        n = three_n // 3
        if self.id_basis.shape[0] != three_n or self.exp_basis.shape[0] != three_n:
            raise InvalidArgumentError("basis row count must equal 3 * n_vertices")
        if self.id_basis.shape[1] < 1 or self.exp_basis.shape[1] < 1:
            raise InvalidArgumentError("bases need at least one column")
        if self.id_sigma.shape != (self.id_basis.shape[1],):
            raise InvalidArgumentError("id_sigma length must match id_basis columns")
        if self.exp_sigma.shape != (self.exp_basis.shape[1],):
            raise InvalidArgumentError("exp_sigma length must match exp_basis columns")
        if not (np.all(self.id_sigma > 0) and np.all(self.exp_sigma > 0)):
            raise InvalidArgumentError("sigma entries must be strictly positive")

        idx = self.landmark_indices
        if idx.min(initial=0) < 0 or idx.max(initial=-1) >= n:
            raise InvalidArgumentError("landmark index out of range")
        if np.unique(idx).size != idx.size:
            raise InvalidArgumentError("landmark indices must be distinct")

        if self.faces is not None:
            f = np.asarray(self.faces)
            if f.ndim != 2 or f.shape[1] != 3 or not np.issubdtype(f.dtype, np.integer):
                raise InvalidArgumentError("faces must be an (F, 3) integer array")
            if f.size and (f.min() < 0 or f.max() >= n):
                raise InvalidArgumentError("face vertex index out of range")
            object.__setattr__(self, "faces", f.astype(np.int64, copy=True))
            self.faces.setflags(write=False)

        for a in (self.mean_shape, self.id_basis, self.exp_basis, self.id_sigma, self.exp_sigma):
            a.setflags(write=False)
        self.landmark_indices.setflags(write=False)

    @property
    def n_vertices(self):
        return self.mean_shape.size // 3

    @property
    def d_id(self):
        return self.id_basis.shape[1]

    @property
    def d_exp(self):
        return self.exp_basis.shape[1]

    @property
    def n_landmarks(self):
        return self.landmark_indices.size


def _farray(a, name, ndim):
    a = np.array(a, dtype=np.float64, order="C")
    if a.ndim != ndim:
        raise InvalidArgumentError(f"{name} must be {ndim}-D")
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return a


@dataclass(frozen=True)
class Coefficients:
    """Identity and expression coefficient vectors for one face."""

    alpha_id: np.ndarray
    alpha_exp: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha_id", _farray(self.alpha_id, "alpha_id", ndim=1))
        object.__setattr__(self, "alpha_exp", _farray(self.alpha_exp, "alpha_exp", ndim=1))
        self.alpha_id.setflags(write=False)
        self.alpha_exp.setflags(write=False)

    @classmethod
    def zeros(cls, model):
        return cls(np.zeros(model.d_id), np.zeros(model.d_exp))


def _check_coeffs(model, coeffs):
    if coeffs.alpha_id.shape != (model.d_id,) or coeffs.alpha_exp.shape != (model.d_exp,):
        raise InvalidArgumentError(
            f"coefficient lengths ({coeffs.alpha_id.size}, {coeffs.alpha_exp.size}) do not "
            f"match model dimensions ({model.d_id}, {model.d_exp})"
        )


def synthesize_shape(model, coeffs):
    """Synthesize the flat (3n,) shape: mean + id_basis@a_id + exp_basis@a_exp."""
    _check_coeffs(model, coeffs)
    return model.mean_shape + model.id_basis @ coeffs.alpha_id + model.exp_basis @ coeffs.alpha_exp


def landmarks_3d(model, coeffs):
    """3D positions (K, 3) of the landmark vertices of the synthesized shape."""
    shape = synthesize_shape(model, coeffs)
    return shape.reshape(-1, 3)[model.landmark_indices]


def _fibonacci_directions(n):
    # evenly spread unit directions; deterministic
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - 2.0 * (i + 0.5) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = i * (np.pi * (3.0 - np.sqrt(5.0)))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _smooth_fields(rng, directions, n_fields, n_terms=8, freq_scale=None):
    """Random smooth scalar fields over the unit sphere, one column each.

    Each field mixes sinusoids at several spatial scales so that distinct
    fields are well separated as vectors.
    """
    n = directions.shape[0]
    out = np.empty((n, n_fields))
    for c in range(n_fields):
        acc = np.zeros(n)
        for _ in range(n_terms):
            scale = freq_scale if freq_scale is not None else rng.uniform(0.8, 3.5)
            omega = rng.normal(0.0, scale, size=3)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            amp = rng.normal(0.0, 1.0)
            acc += amp * np.sin(directions @ omega + phase)
        out[:, c] = acc
    return out


def _spread_subset(points, k, start):
    """Greedy farthest-point selection of k indices into `points`."""
    chosen = [start]
    d2 = np.sum((points - points[start]) ** 2, axis=1)
    for _ in range(k - 1):
        nxt = int(np.argmax(d2))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((points - points[nxt]) ** 2, axis=1))
    return np.array(sorted(chosen), dtype=np.int64)


def make_synthetic_model(
    seed,
    n_vertices=500,
    d_id=40,
    d_exp=10,
    K=68,
    id_sigma0=1.2,
    exp_sigma0=0.6,
    sigma_decay=0.9,
    semi_axes=(0.85, 1.10, 0.70),
    with_faces=True,
):
    """Generate a deterministic synthetic morphable model.

    The mean shape lives on a smoothed ellipsoid with a face-like aspect
    ratio (narrower in depth than width); basis columns are random smooth
    displacement fields orthonormalized with QR, and mode scales decay
    geometrically (mode m scale = sigma0 * decay^m). Landmark vertices are
    spread over the front-facing (positive-z) part of the surface by
    farthest-point sampling.

    The same seed always yields a byte-identical model.
    """
    if n_vertices < 4:
        raise InvalidArgumentError("n_vertices must be at least 4")
    if d_id < 1 or d_exp < 1:
        raise InvalidArgumentError("d_id and d_exp must be positive")
    if K < 1 or K > n_vertices:
        raise InvalidArgumentError("K must satisfy 1 <= K <= n_vertices")
    if d_id + d_exp >= 2 * K:
        raise InvalidArgumentError("d_id + d_exp must be < 2*K so fitting is not underdetermined")
    if sigma_decay <= 0 or id_sigma0 <= 0 or exp_sigma0 <= 0:
        raise InvalidArgumentError("sigma scales must be positive")

    rng = np.random.default_rng(seed)
    u = _fibonacci_directions(n_vertices)

    # smooth radial modulation keeps the surface star-shaped
    bump = _smooth_fields(rng, u, 1, n_terms=6, freq_scale=1.8)[:, 0]
    bump *= 0.08 / max(float(np.max(np.abs(bump))), 1e-12)
    verts = (1.0 + bump)[:, None] * u * np.asarray(semi_axes, dtype=np.float64)
    mean_shape = verts.reshape(-1)

    # Span of global affine motions of the mean shape (translations plus all
    # linear maps). Real PCA bases lack these components because scans are
    # similarity-aligned before training; leaving them in would let shape
    # coefficients mimic pose, which both misleads the fitter and makes the
    # recovery problem unidentifiable.
    affine = np.zeros((3 * n_vertices, 12))
    centered = verts - verts.mean(axis=0)
    for c in range(3):
        affine[c::3, c] = 1.0
    for i in range(3):
        for j in range(3):
            affine[i::3, 3 + 3 * i + j] = centered[:, j]
    affine_q, _ = np.linalg.qr(affine)

    def basis_block(d, exclude):
        cols = np.empty((3 * n_vertices, d))
        for c in range(d):
            fields = _smooth_fields(rng, u, 3)
            cols[:, c] = fields.reshape(-1)
        for q in exclude:
            cols -= q @ (q.T @ cols)
        q, _ = np.linalg.qr(cols)
        return np.ascontiguousarray(q)

    id_basis = basis_block(d_id, (affine_q,))
    # expression modes orthogonal to the identity block keeps the two
    # coefficient sets identifiable from sparse landmarks
    exp_basis = basis_block(d_exp, (affine_q, id_basis))
    id_sigma = id_sigma0 * sigma_decay ** np.arange(d_id)
    exp_sigma = exp_sigma0 * sigma_decay ** np.arange(d_exp)

    centroid = verts.mean(axis=0)
    rel_z = verts[:, 2] - centroid[2]
    front = np.flatnonzero(rel_z > 0.15 * rel_z.max())
    if front.size < K:
        raise InvalidArgumentError(
            f"only {front.size} front-facing vertices available for K={K} landmarks"
        )
    start = int(np.argmax(verts[front, 2]))
    landmark_indices = front[_spread_subset(verts[front], K, start)]

    faces = None
    if with_faces:
        from scipy.spatial import ConvexHull

        faces = ConvexHull(u).simplices.astype(np.int64)

    return MorphableModel(
        mean_shape=mean_shape,
        id_basis=id_basis,
        exp_basis=exp_basis,
        id_sigma=id_sigma,
        exp_sigma=exp_sigma,
        landmark_indices=landmark_indices,
        faces=faces,
    )


# ---------------------------------------------------------------------------
# persistence: a single JSON document; floats round-trip bit-exactly because
# Python serializes them with repr (shortest exact decimal form)

_REQUIRED_FIELDS = (
    "n_vertices",
    "d_id",
    "d_exp",
    "K",
    "mean_shape",
    "id_basis",
    "exp_basis",
    "id_sigma",
    "exp_sigma",
    "landmark_indices",
)


def save_model(model, path):
    """Write the model to `path` as JSON (atomically)."""
    doc = {
        "n_vertices": model.n_vertices,
        "d_id": model.d_id,
        "d_exp": model.d_exp,
        "K": model.n_landmarks,
        "mean_shape": model.mean_shape.tolist(),
        "id_basis": [col.tolist() for col in model.id_basis.T],
        "exp_basis": [col.tolist() for col in model.exp_basis.T],
        "id_sigma": model.id_sigma.tolist(),
        "exp_sigma": model.exp_sigma.tolist(),
        "landmark_indices": model.landmark_indices.tolist(),
    }
    if model.faces is not None:
        doc["faces"] = model.faces.tolist()
    atomic_write_text(path, json.dumps(doc) + "\n")


def _field_matrix(doc, name, rows, cols, path):
    raw = doc[name]
    if not isinstance(raw, list) or len(raw) != cols:
        raise ValidationError(f"{path}: field '{name}' must have {cols} columns")
    try:
        mat = np.array(raw, dtype=np.float64).T
    except ValueError as e:
        raise ParseError(f"{path}: field '{name}' is ragged or non-numeric: {e}") from None
    if mat.shape != (rows, cols):
        raise ValidationError(f"{path}: field '{name}' has shape {mat.shape}, expected {(rows, cols)}")
    return mat


def load_model(path):
    """Read a model JSON document; inverse of save_model.

    Raises ParseError for malformed files (naming the line or field) and
    ValidationError when the content is inconsistent with its own declared
    dimensions or the model invariants.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top-level JSON value must be an object")
    for name in _REQUIRED_FIELDS:
        if name not in doc:
            raise ParseError(f"{path}: missing field '{name}'")

    try:
        n = int(doc["n_vertices"])
        d_id = int(doc["d_id"])
        d_exp = int(doc["d_exp"])
        k = int(doc["K"])
    except (TypeError, ValueError):
        raise ParseError(f"{path}: dimension fields must be integers") from None

    try:
        mean_shape = np.array(doc["mean_shape"], dtype=np.float64)
        id_sigma = np.array(doc["id_sigma"], dtype=np.float64)
        exp_sigma = np.array(doc["exp_sigma"], dtype=np.float64)
        landmark_indices = np.array(doc["landmark_indices"], dtype=np.int64)
    except (TypeError, ValueError) as e:
        raise ParseError(f"{path}: non-numeric value in array field: {e}") from None

    if mean_shape.shape != (3 * n,):
        raise ValidationError(f"{path}: mean_shape length {mean_shape.size} != 3*n_vertices={3 * n}")
    if landmark_indices.shape != (k,):
        raise ValidationError(f"{path}: landmark_indices length {landmark_indices.size} != K={k}")

    id_basis = _field_matrix(doc, "id_basis", 3 * n, d_id, path)
    exp_basis = _field_matrix(doc, "exp_basis", 3 * n, d_exp, path)

    faces = None
    if "faces" in doc and doc["faces"] is not None:
        try:
            faces = np.array(doc["faces"], dtype=np.int64)
        except (TypeError, ValueError) as e:
            raise ParseError(f"{path}: field 'faces' is malformed: {e}") from None

    try:
        return MorphableModel(
            mean_shape=mean_shape,
            id_basis=id_basis,
            exp_basis=exp_basis,
            id_sigma=id_sigma,
            exp_sigma=exp_sigma,
            landmark_indices=landmark_indices,
            faces=faces,
        )
    except InvalidArgumentError as e:
        raise ValidationError(f"{path}: {e}") from None

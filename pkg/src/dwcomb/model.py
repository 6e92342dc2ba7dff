"""Problem instances: a finite shared support with per-domain densities.

Each support point ``x`` carries the marginal density of every source domain,
the prediction of every base regressor and the first two moments of the
label, ``E[y|x]`` and ``E[y^2|x]``. Under a shared conditional these moments
are all the squared loss needs.

JSON layout::

    {"domains": ["books", "dvd"],
     "points": [{"densities": [..p..], "predictions": [..p..],
                 "y_mean": 1.0, "y_sq_mean": 1.0,
                 "label_dist": {"labels": [..m..], "cond": [[..m..] x p]}},
                ...]}

CSV layout: header ``d1..dp,h1..hp,y_mean,y_sq_mean``, one row per point.
"""

import csv
import io
import json
import os
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

RENORM_TOL = 1e-3
EXACT_TOL = 1e-12
MOMENT_TOL = 1e-9
COND_TOL = 1e-6


class InstanceError(ValueError):
    """Base class for rejected instance documents."""


class ParseError(InstanceError):
    pass


class SchemaError(InstanceError):
    pass


class ValidationError(InstanceError):
    pass


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Immutable discrete multiple-source regression problem.

    Attributes
    ----------
    domain_names : tuple of str
        One name per source domain (length ``p``).
    densities : ndarray, shape (n, p)
        ``densities[x, k]`` is the marginal mass of domain ``k`` at point ``x``.
        Every column sums to one.
    predictions : ndarray, shape (n, p)
        ``predictions[x, k]`` is the base regressor ``h_k`` evaluated at ``x``.
    y_mean, y_sq_mean : ndarray, shape (n,)
        Conditional label moments ``E[y|x]`` and ``E[y^2|x]``.
    labels : ndarray, shape (m,), optional
        Shared finite label set for per-domain conditionals.
    label_cond : ndarray, shape (n, p, m), optional
        ``label_cond[x, k]`` is the conditional label distribution of domain
        ``k`` at ``x``. Only used by the distinct-conditionals bound.
    """

    domain_names: tuple
    densities: np.ndarray
    predictions: np.ndarray
    y_mean: np.ndarray
    y_sq_mean: np.ndarray
    labels: np.ndarray = None
    label_cond: np.ndarray = None
    renormalized: bool = field(default=False, compare=False)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "domain_names", tuple(str(d) for d in self.domain_names))
        for name in ("densities", "predictions", "y_mean", "y_sq_mean"):
            set_(self, name, _frozen(getattr(self, name)))
        if self.labels is not None:
            set_(self, "labels", _frozen(self.labels))
            set_(self, "label_cond", _frozen(self.label_cond))
        self._validate()

    def _validate(self):
        p = len(self.domain_names)
        if p < 1:
            raise SchemaError("at least one domain is required")
        if self.densities.ndim != 2 or self.densities.shape[0] < 1:
            raise SchemaError("densities must be an (n, p) array with n >= 1")
        n = self.densities.shape[0]
        if self.densities.shape != (n, p) or self.predictions.shape != (n, p):
            raise SchemaError(
                f"densities/predictions must have shape ({n}, {p}), got "
                f"{self.densities.shape} and {self.predictions.shape}")
        if self.y_mean.shape != (n,) or self.y_sq_mean.shape != (n,):
            raise SchemaError("y_mean and y_sq_mean must have one entry per point")
        for name in ("densities", "predictions", "y_mean", "y_sq_mean"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValidationError(f"{name} contains non-finite values")
        if np.any(self.densities < 0):
            raise ValidationError("densities must be nonnegative")
        sums = self.densities.sum(axis=0)
        bad = np.nonzero(np.abs(sums - 1.0) > 1e-6)[0]
        if bad.size:
            k = bad[0]
            raise ValidationError(
                f"density column of domain {self.domain_names[k]!r} sums to "
                f"{sums[k]:.9g}, expected 1")
        if np.any(self.y_sq_mean < self.y_mean ** 2 - MOMENT_TOL):
            raise ValidationError("y_sq_mean must be >= y_mean**2")
        if self.labels is not None:
            m = self.labels.shape[0]
            if self.label_cond is None or self.label_cond.shape != (n, p, m):
                raise SchemaError(f"label_dist cond must have shape ({n}, {p}, {m})")
            if np.any(self.label_cond < 0) or np.any(
                    np.abs(self.label_cond.sum(axis=2) - 1.0) > COND_TOL):
                raise ValidationError("label_dist rows must be probability vectors")

    @property
    def n(self):
        return self.densities.shape[0]

    @property
    def p(self):
        return self.densities.shape[1]

    @property
    def uniform_mass(self):
        """Mass ``1/n`` of the uniform marginal at every support point."""
        return 1.0 / self.n

    @property
    def pointwise_losses(self):
        """``(n, p)`` array of ``E[(h_k(x) - y)^2 | x]``."""
        h = self.predictions
        return h ** 2 - 2.0 * h * self.y_mean[:, None] + self.y_sq_mean[:, None]

    @property
    def has_label_dist(self):
        return self.labels is not None

    def with_densities(self, densities):
        """Copy of the instance with a different density matrix."""
        return ProblemInstance(self.domain_names, densities, self.predictions,
                               self.y_mean, self.y_sq_mean, self.labels,
                               self.label_cond)


def _renormalize(densities):
    d = np.asarray(densities, dtype=float)
    if d.ndim == 2 and np.all(np.isfinite(d)):
        if np.any(d < 0):
            raise ValidationError("densities must be nonnegative")
        sums = d.sum(axis=0)
        off = np.abs(sums - 1.0)
        if np.any(off > RENORM_TOL):
            k = int(np.argmax(off))
            raise ValidationError(
                f"density column {k} sums to {sums[k]:.9g}; deviation exceeds "
                f"{RENORM_TOL}")
        if np.all(off <= EXACT_TOL):
            # already normalized up to summation rounding; keep the exact bits
            return d, False
        return d / sums, True
    return d, False


def from_arrays(densities, predictions, y_mean, y_sq_mean=None,
                domain_names=None, labels=None, label_cond=None):
    """Build a validated instance, renormalizing near-unit density columns.

    ``y_sq_mean`` defaults to ``y_mean**2`` (deterministic labels).
    """
    densities, renorm = _renormalize(densities)
    y_mean = np.asarray(y_mean, dtype=float)
    if y_sq_mean is None:
        y_sq_mean = y_mean ** 2
    if domain_names is None:
        p = densities.shape[1] if densities.ndim == 2 else 0
        domain_names = [f"d{k + 1}" for k in range(p)]
    return ProblemInstance(domain_names, densities, predictions, y_mean,
                           y_sq_mean, labels, label_cond, renormalized=renorm)


def _parse_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict) or "domains" not in doc or "points" not in doc:
        raise SchemaError('document must be an object with "domains" and "points"')
    domains, points = doc["domains"], doc["points"]
    if not isinstance(domains, list) or not isinstance(points, list) or not points:
        raise SchemaError('"domains" and "points" must be non-empty arrays')
    p = len(domains)
    cols = {"densities": [], "predictions": [], "y_mean": [], "y_sq_mean": []}
    labels, cond = None, []
    for i, pt in enumerate(points):
        if not isinstance(pt, dict):
            raise SchemaError(f"point {i} is not an object")
        try:
            for key in ("densities", "predictions"):
                vec = [float(v) for v in pt[key]]
                if len(vec) != p:
                    raise SchemaError(f"point {i}: {key} has {len(vec)} entries, expected {p}")
                cols[key].append(vec)
            cols["y_mean"].append(float(pt["y_mean"]))
            cols["y_sq_mean"].append(float(pt["y_sq_mean"]))
        except KeyError as exc:
            raise SchemaError(f"point {i}: missing field {exc}") from None
        except TypeError:
            raise SchemaError(f"point {i}: non-numeric field") from None
        ld = pt.get("label_dist")
        if (ld is None) != (labels is None) and i > 0:
            raise SchemaError("label_dist must be given for every point or none")
        if ld is not None:
            try:
                lab = [float(v) for v in ld["labels"]]
                rows = [[float(v) for v in row] for row in ld["cond"]]
            except (KeyError, TypeError):
                raise SchemaError(f"point {i}: malformed label_dist") from None
            if labels is not None and lab != labels:
                raise SchemaError("label_dist labels must be shared across points")
            if len(rows) != p or any(len(r) != len(lab) for r in rows):
                raise SchemaError(f"point {i}: label_dist cond must be p rows of m values")
            labels = lab
            cond.append(rows)
    return from_arrays(cols["densities"], cols["predictions"], cols["y_mean"],
                       cols["y_sq_mean"], domains, labels,
                       cond if labels is not None else None)


def _parse_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if len(rows) < 2:
        raise SchemaError("CSV needs a header and at least one row")
    header = [h.strip() for h in rows[0]]
    if len(header) < 4 or (len(header) - 2) % 2 or header[-2:] != ["y_mean", "y_sq_mean"]:
        raise SchemaError("CSV header must be d1..dp,h1..hp,y_mean,y_sq_mean")
    p = (len(header) - 2) // 2
    expected = [f"d{k + 1}" for k in range(p)] + [f"h{k + 1}" for k in range(p)]
    if header[:2 * p] != expected:
        raise SchemaError("CSV header must be d1..dp,h1..hp,y_mean,y_sq_mean")
    try:
        body = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise ParseError(f"malformed CSV value: {exc}") from None
    if body.ndim != 2 or body.shape[1] != len(header):
        raise SchemaError("ragged CSV rows")
    return from_arrays(body[:, :p], body[:, p:2 * p], body[:, -2], body[:, -1])


def load_instance(source, format=None):
    """Read an instance from a path, text or binary stream.

    Parameters
    ----------
    source : str, os.PathLike or file-like
    format : {"json", "csv"}, optional
        Inferred from the file suffix when omitted (default json).
    """
    if isinstance(source, (str, os.PathLike)):
        if format is None:
            format = "csv" if str(source).lower().endswith(".csv") else "json"
        with open(source, "rb") as fh:
            raw = fh.read()
    else:
        raw = source.read()
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc}") from None
    format = (format or "json").lower()
    if format == "json":
        return _parse_json(raw)
    if format == "csv":
        return _parse_csv(raw)
    raise ValueError(f"unknown format {format!r}")


def instance_to_dict(inst):
    points = []
    for i in range(inst.n):
        pt = {
            "densities": inst.densities[i].tolist(),
            "predictions": inst.predictions[i].tolist(),
            "y_mean": float(inst.y_mean[i]),
            "y_sq_mean": float(inst.y_sq_mean[i]),
        }
        if inst.has_label_dist:
            pt["label_dist"] = {"labels": inst.labels.tolist(),
                                "cond": inst.label_cond[i].tolist()}
        points.append(pt)
    return {"domains": list(inst.domain_names), "points": points}


def dumps_instance(inst, format="json"):
    """Serialize an instance; floats are written with full repr precision."""
    if format == "json":
        return json.dumps(instance_to_dict(inst))
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        p = inst.p
        w.writerow([f"d{k + 1}" for k in range(p)] + [f"h{k + 1}" for k in range(p)]
                   + ["y_mean", "y_sq_mean"])
        for i in range(inst.n):
            w.writerow([repr(float(v)) for v in inst.densities[i]]
                       + [repr(float(v)) for v in inst.predictions[i]]
                       + [repr(float(inst.y_mean[i])), repr(float(inst.y_sq_mean[i]))])
        return buf.getvalue()
    raise ValueError(f"unknown format {format!r}")


def save_instance(inst, path, format=None):
    if format is None:
        format = "csv" if str(path).lower().endswith(".csv") else "json"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_instance(inst, format))


def empirical_instance_from_samples(samples, predictions, y_mean, y_sq_mean=None,
                                    domain_names=None):
    """Instance whose densities are the empirical marginals of the samples.

    Parameters
    ----------
    samples : sequence of p sequences of int
        ``samples[k]`` holds the support indices drawn from domain ``k``.
    predictions : array_like, shape (n, p)
    y_mean, y_sq_mean : array_like, shape (n,)

    Points never sampled by any domain keep zero density everywhere.
    """
    predictions = np.asarray(predictions, dtype=float)
    n = predictions.shape[0]
    p = len(samples)
    dens = np.zeros((n, p))
    for k, draws in enumerate(samples):
        draws = list(draws)
        if not draws:
            raise ValidationError(f"domain {k} has no samples")
        for idx, c in Counter(draws).items():
            if not 0 <= idx < n:
                raise ValidationError(f"sample index {idx} outside the support")
            dens[idx, k] = c
        dens[:, k] /= len(draws)
    return from_arrays(dens, predictions, y_mean, y_sq_mean, domain_names)

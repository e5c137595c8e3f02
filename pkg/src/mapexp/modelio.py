"""Versioned JSON encoding of model specifications.

Top-level document layout (``spec_version: 1``)::

    {
      "spec_version": 1,
      "chain": {"kind": "dense", "generator": [[...], ...]}
             | {"kind": "petal_flower", "rate": q,
                "petal_weights": {"geometric": {"ratio": r}} or {"explicit": [...]},
                "side_state": false},
      "states": [ {"id": 0, "drift": [bx, by], "sigma": [[vxx, vxy], [vxy, vyy]],
                   "jumps": {"rate": r, "law": LAW},
                   "small_jumps": {"truncation": eps, ...}}, ... ],
      "switch_laws": [ {"from": i, "to": j, "law": LAW}, ... ],
      "petal_model": {"hub": STATE_BODY, "petal_kind": "...",
                      "switch_kind": "...", "side": STATE_BODY}
    }

Dense chains use ``states`` + ``switch_laws``; petal flowers use
``petal_model`` (their countable state family is rule-generated, so an
explicit state list cannot describe them).

Bivariate law encodings: ``{"atom": [x, y]}``, ``{"atoms": [{"p": .., "x": ..,
"y": ..}, ...]}``, ``{"curve": {"ci": .., "cj": .., "x_marginal": MARGINAL}}``,
``{"product": {"x": MARGINAL, "y": MARGINAL}}``.

Marginal encodings: ``{"point": c}``, ``{"normal": [mu, sigma]}``,
``{"exponential": {"rate": r}}``, ``{"pareto": {"alpha": a, "xm": m}}``,
``{"log_pareto": {"alpha": a, "xm": m}}``, ``{"atoms": [{"p": .., "x": ..}]}``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import laws as L
from . import model as M

__all__ = ["ModelFileError", "load_model", "dump_model", "loads_model", "dumps_model"]

SPEC_VERSION = 1


class ModelFileError(Exception):
    """Malformed or unsupported model document."""


# ---------------------------------------------------------------------------
# marginals
# ---------------------------------------------------------------------------


def _marginal_from(obj) -> L.Marginal:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ModelFileError(f"marginal must be a single-key object, got {obj!r}")
    key, val = next(iter(obj.items()))
    try:
        if key == "point":
            return L.PointMass(float(val))
        if key == "normal":
            mu, sigma = val
            return L.NormalLaw(float(mu), float(sigma))
        if key == "exponential":
            return L.ExponentialLaw(float(val["rate"]))
        if key == "pareto":
            return L.ParetoLaw(float(val["alpha"]), float(val["xm"]))
        if key == "log_pareto":
            return L.LogParetoLaw(float(val["alpha"]), float(val["xm"]))
        if key == "atoms":
            return L.DiscreteLaw([float(a["x"]) for a in val], [float(a["p"]) for a in val])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"bad parameters for marginal {key!r}: {exc}") from exc
    raise ModelFileError(f"unknown marginal kind {key!r}")


def _marginal_to(m: L.Marginal) -> dict:
    if isinstance(m, L.PointMass):
        return {"point": m.c}
    if isinstance(m, L.NormalLaw):
        return {"normal": [m.mu, m.sigma]}
    if isinstance(m, L.ExponentialLaw):
        return {"exponential": {"rate": m.rate}}
    if isinstance(m, L.LogParetoLaw):
        return {"log_pareto": {"alpha": m.alpha, "xm": m.xm}}
    if isinstance(m, L.ParetoLaw):
        return {"pareto": {"alpha": m.alpha, "xm": m.xm}}
    if isinstance(m, L.DiscreteLaw):
        return {"atoms": [{"p": p, "x": x} for x, p in zip(m.xs, m.ps)]}
    raise ModelFileError(f"marginal {type(m).__name__} has no file encoding")


# ---------------------------------------------------------------------------
# bivariate laws
# ---------------------------------------------------------------------------


def _bivariate_from(obj) -> L.BivariateLaw:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ModelFileError(f"law must be a single-key object, got {obj!r}")
    key, val = next(iter(obj.items()))
    try:
        if key == "atom":
            x, y = val
            return L.bivariate_atom(float(x), float(y))
        if key == "atoms":
            return L.BivariateAtoms(
                ps=[float(a["p"]) for a in val],
                xs=[float(a["x"]) for a in val],
                ys=[float(a["y"]) for a in val])
        if key == "curve":
            return L.CurveLaw(float(val["ci"]), float(val["cj"]),
                              _marginal_from(val["x_marginal"]))
        if key == "product":
            return L.ProductLaw(_marginal_from(val["x"]), _marginal_from(val["y"]))
    except ModelFileError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"bad parameters for law {key!r}: {exc}") from exc
    raise ModelFileError(f"unknown law kind {key!r}")


def _bivariate_to(law: L.BivariateLaw) -> dict:
    if isinstance(law, L.BivariateAtoms):
        if len(law.ps) == 1:
            return {"atom": [law.xs[0], law.ys[0]]}
        return {"atoms": [{"p": p, "x": x, "y": y}
                          for p, x, y in zip(law.ps, law.xs, law.ys)]}
    if isinstance(law, L.CurveLaw):
        return {"curve": {"ci": law.ci, "cj": law.cj, "x_marginal": _marginal_to(law.x_law)}}
    if isinstance(law, L.ProductLaw):
        return {"product": {"x": _marginal_to(law.x_law), "y": _marginal_to(law.y_law)}}
    raise ModelFileError(f"law {type(law).__name__} has no file encoding")


# ---------------------------------------------------------------------------
# triplets
# ---------------------------------------------------------------------------


def _triplet_from(obj: dict) -> M.LevyTripletBiv:
    drift = obj.get("drift", [0.0, 0.0])
    sigma = obj.get("sigma", [[0.0, 0.0], [0.0, 0.0]])
    s = np.asarray(sigma, dtype=float)
    if s.shape != (2, 2) or abs(s[0, 1] - s[1, 0]) > 1e-12 * max(1.0, abs(s[0, 1])):
        raise ModelFileError("sigma must be a symmetric 2x2 matrix")
    jumps = None
    if "jumps" in obj and obj["jumps"] is not None:
        j = obj["jumps"]
        jumps = M.JumpComponent(rate=float(j["rate"]), law=_bivariate_from(j["law"]))
    small = None
    if "small_jumps" in obj and obj["small_jumps"] is not None:
        sj = obj["small_jumps"]
        small = M.SmallJumpApprox(
            truncation=float(sj["truncation"]),
            var_xi=float(sj.get("var_xi", 0.0)),
            var_eta=float(sj.get("var_eta", 0.0)),
            cov=float(sj.get("cov", 0.0)),
            drift_xi=float(sj.get("drift_xi", 0.0)),
            drift_eta=float(sj.get("drift_eta", 0.0)))
    return M.LevyTripletBiv(
        drift_xi=float(drift[0]), drift_eta=float(drift[1]),
        var_xi=float(s[0, 0]), var_eta=float(s[1, 1]), cov=float(s[0, 1]),
        jumps=jumps, small_jumps=small)


def _triplet_to(t: M.LevyTripletBiv) -> dict:
    out: dict = {
        "drift": [t.drift_xi, t.drift_eta],
        "sigma": [[t.var_xi, t.cov], [t.cov, t.var_eta]],
    }
    if t.jumps is not None:
        out["jumps"] = {"rate": t.jumps.rate, "law": _bivariate_to(t.jumps.law)}
    if t.small_jumps is not None:
        sj = t.small_jumps
        out["small_jumps"] = {
            "truncation": sj.truncation, "var_xi": sj.var_xi, "var_eta": sj.var_eta,
            "cov": sj.cov, "drift_xi": sj.drift_xi, "drift_eta": sj.drift_eta,
        }
    return out


# ---------------------------------------------------------------------------
# documents
# ---------------------------------------------------------------------------


def loads_model(text: str) -> M.MapSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(
            f"not valid JSON: {exc.msg} at line {exc.lineno} column {exc.colno}") from exc
    if not isinstance(doc, dict):
        raise ModelFileError("document root must be an object")
    version = doc.get("spec_version")
    if version != SPEC_VERSION:
        raise ModelFileError(f"unsupported spec_version {version!r} (expected {SPEC_VERSION})")
    chain_obj = doc.get("chain")
    if not isinstance(chain_obj, dict) or "kind" not in chain_obj:
        raise ModelFileError("missing or malformed 'chain' section")

    kind = chain_obj["kind"]
    if kind == "dense":
        try:
            gen = np.asarray(chain_obj["generator"], dtype=float)
        except (KeyError, ValueError) as exc:
            raise ModelFileError(f"bad generator: {exc}") from exc
        chain = M.DenseFiniteChain(gen)
        states = doc.get("states")
        if not isinstance(states, list) or not states:
            raise ModelFileError("dense models need a non-empty 'states' list")
        triplets: dict[int, M.LevyTripletBiv] = {}
        for entry in states:
            if "id" not in entry:
                raise ModelFileError("each state entry needs an 'id'")
            sid = int(entry["id"])
            if sid in triplets:
                raise ModelFileError(f"duplicate state id {sid}")
            triplets[sid] = _triplet_from(entry)
        switch: dict[tuple[int, int], L.BivariateLaw] = {}
        for entry in doc.get("switch_laws", []) or []:
            try:
                pair = (int(entry["from"]), int(entry["to"]))
            except (KeyError, ValueError) as exc:
                raise ModelFileError(f"bad switch law entry: {exc}") from exc
            switch[pair] = _bivariate_from(entry["law"])
        return M.MapSpec(chain=chain, triplets=triplets, switch_laws=switch)

    if kind == "petal_flower":
        try:
            rate = float(chain_obj["rate"])
        except (KeyError, ValueError) as exc:
            raise ModelFileError(f"bad flower rate: {exc}") from exc
        wobj = chain_obj.get("petal_weights", {"geometric": {"ratio": 0.5}})
        if "geometric" in wobj:
            weights = M.GeometricWeights(float(wobj["geometric"]["ratio"]))
        elif "explicit" in wobj:
            weights = M.ExplicitWeights(tuple(float(w) for w in wobj["explicit"]))
        else:
            raise ModelFileError(f"unknown petal_weights encoding {wobj!r}")
        chain = M.PetalFlowerChain(q=rate, weights=weights,
                                   side_state=bool(chain_obj.get("side_state", False)))
        pm_obj = doc.get("petal_model")
        if not isinstance(pm_obj, dict):
            raise ModelFileError("petal_flower models need a 'petal_model' section")
        try:
            pm = M.PetalModel(
                hub=_triplet_from(pm_obj.get("hub", {})),
                petal_kind=pm_obj.get("petal_kind", "zero"),
                switch_kind=pm_obj.get("switch_kind", "none"),
                side=_triplet_from(pm_obj["side"]) if pm_obj.get("side") else None)
        except ValueError as exc:
            raise ModelFileError(str(exc)) from exc
        return M.MapSpec(chain=chain, petal_model=pm)

    raise ModelFileError(f"unknown chain kind {kind!r}")


def dumps_model(spec: M.MapSpec) -> str:
    if spec.finite_state:
        doc = {
            "spec_version": SPEC_VERSION,
            "chain": {"kind": "dense", "generator": spec.chain.generator.tolist()},
            "states": [{"id": i, **_triplet_to(spec.triplets[i])}
                       for i in sorted(spec.triplets)],
            "switch_laws": [{"from": i, "to": j, "law": _bivariate_to(law)}
                            for (i, j), law in sorted((spec.switch_laws or {}).items())],
        }
    else:
        ch = spec.chain
        if isinstance(ch.weights, M.GeometricWeights):
            wobj = {"geometric": {"ratio": ch.weights.ratio}}
        else:
            wobj = {"explicit": list(ch.weights.weights)}
        pm = spec.petal_model
        pm_obj = {"hub": _triplet_to(pm.hub), "petal_kind": pm.petal_kind,
                  "switch_kind": pm.switch_kind}
        if pm.side is not None:
            pm_obj["side"] = _triplet_to(pm.side)
        doc = {
            "spec_version": SPEC_VERSION,
            "chain": {"kind": "petal_flower", "rate": ch.q,
                      "petal_weights": wobj, "side_state": ch.side_state},
            "petal_model": pm_obj,
        }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def load_model(path: str | Path) -> M.MapSpec:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ModelFileError(f"cannot read {p}: {exc}") from exc
    return loads_model(text)


def dump_model(spec: M.MapSpec, path: str | Path) -> None:
    Path(path).write_text(dumps_model(spec))

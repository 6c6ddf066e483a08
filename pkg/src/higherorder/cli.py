"""Command-line front end.

Exit codes: 0 when every requested check passes, 1 when a property is
refuted, 2 on usage or parse errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import channels as ch
from . import lat, supermaps as sm
from .tensor_core import MAX_TOTAL_DIM, SystemType, TensorError

CONFIG_ENV = "HIGHERORDER_CONFIG"
EXIT_OK, EXIT_REFUTED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    trials: int = 200
    tol: float = 1e-8
    max_total_dim: int = MAX_TOTAL_DIM
    output: str | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise UsageError("tol must be positive")
        if self.trials < 1:
            raise UsageError("trials must be >= 1")
        if self.max_total_dim < 1:
            raise UsageError("max_total_dim must be >= 1")

    @classmethod
    def load(cls, path: str | None) -> "RunConfig":
        path = path or os.environ.get(CONFIG_ENV)
        if not path:
            return cls()
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


def _emit(doc) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _write_json(path: str | None, doc) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True)
    if path is None:
        print(text)
    else:
        Path(path).write_text(text + "\n")


def _edge(e) -> str:
    return f"{e[0]}->{e[1]}"


# ---------------------------------------------------------------------------
# validate-channel


def cmd_validate_channel(args, cfg: RunConfig) -> int:
    try:
        c = ch.channel_from_dict(_read_json(args.file))
        rel = ch.SignalingRelation.from_dict(_read_json(args.signaling)) if args.signaling else None
    except (ch.ChannelError, TensorError, KeyError, TypeError) as exc:
        raise UsageError(f"parse error: {exc}") from exc
    rep = ch.is_channel(c, cfg.tol)
    doc = {
        "cp": rep.cp,
        "tp": rep.tp,
        "min_eigenvalue": rep.min_eigenvalue,
        "tp_deviation": rep.tp_deviation,
    }
    ok = bool(rep)
    if rel is not None:
        try:
            edges = ch.signaling_report(c, rel)
        except ch.ChannelError as exc:
            raise UsageError(str(exc)) from exc
        doc["signaling"] = {_edge(e): {"deviation": d, "passed": d <= cfg.tol} for e, d in edges.items()}
        violated = [_edge(e) for e, d in edges.items() if d > cfg.tol]
        doc["violated_edges"] = violated
        ok = ok and not violated
    doc["passed"] = ok
    _emit(doc)
    return EXIT_OK if ok else EXIT_REFUTED


# ---------------------------------------------------------------------------
# extract

QUBIT_A = SystemType.of("a", 2)
QUBIT_AP = SystemType.of("a'", 2)
QUBIT_B = SystemType.of("b", 2)
QUBIT_BP = SystemType.of("b'", 2)


def _reference_supermap(seed: int) -> sm.Supermap:
    return sm.comb_to_supermap(sm.random_comb(QUBIT_A, QUBIT_AP, QUBIT_B, QUBIT_BP, 2, seed))


def _switch_fixed_oracle(seed: int) -> lat.LatOracle:
    """Switch with its second slot filled by a fixed random channel."""
    sw = sm.switch_supermap(2)
    _, _, a2, a2p = sm.switch_slots(2)
    fixed = ch.random_channel(a2, a2p, 2, seed)
    s = sw.partial_apply({1: fixed}).as_supermap()
    return lat.LatOracle(s.source, s.target, lambda phi: sm.apply_supermap(s, phi), "switch-fixed")


BUILTINS = {
    "identity": lambda seed: lat.identity_oracle(QUBIT_A, QUBIT_AP),
    "switch-fixed": _switch_fixed_oracle,
    "adversarial-marginal": lambda seed: lat.marginal_oracle(_reference_supermap(seed)),
    "adversarial-twist": lambda seed: lat.twist_oracle(_reference_supermap(seed)),
}


def comb_to_dict(c: sm.Comb) -> dict:
    return {
        "comb": {
            "pre": ch.channel_to_dict(c.pre),
            "post": ch.channel_to_dict(c.post),
            "env": [list(f) for f in c.env.factors],
        }
    }


def comb_from_dict(doc) -> sm.Comb:
    body = doc["comb"]
    env = SystemType(tuple((str(l), int(d)) for l, d in body["env"]))
    return sm.Comb(ch.channel_from_dict(body["pre"]), ch.channel_from_dict(body["post"]), env)


def _load_oracle(name: str, seed: int) -> lat.LatOracle:
    if name in BUILTINS:
        return BUILTINS[name](seed)
    if not Path(name).exists():
        raise UsageError(f"unknown oracle {name!r}; built-ins: {sorted(BUILTINS)}")
    doc = _read_json(name)
    try:
        if "comb" in doc:
            return lat.comb_oracle(comb_from_dict(doc))
        if "supermap" in doc:
            return lat.embed(sm.supermap_from_dict(doc))
    except (ch.ChannelError, TensorError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"parse error: {exc}") from exc
    raise UsageError(f"{name} holds neither a comb nor a supermap")


def cmd_extract(args, cfg: RunConfig) -> int:
    oracle = _load_oracle(args.oracle, cfg.seed)
    rep = lat.check_local_applicability(oracle, cfg.trials, cfg.seed, cfg.tol, stop_on_failure=True)
    doc = {"oracle": oracle.name, "local_applicability": rep.to_dict(), "passed": rep.passed}
    if not rep.passed:
        doc["first_failing_seed"] = rep.first_failing_seed
        _emit(doc)
        return EXIT_REFUTED
    s = lat.extract(oracle, cfg.tol)
    out = args.output or cfg.output
    if out is None:
        doc["supermap"] = sm.supermap_to_dict(s)
        _emit(doc)
    else:
        _write_json(out, sm.supermap_to_dict(s))
        doc["written"] = out
        _emit(doc)
    return EXIT_OK


# ---------------------------------------------------------------------------
# roundtrip


def _parse_dims(text: str) -> tuple[int, int, int, int]:
    try:
        dims = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"bad --dims {text!r}") from None
    if len(dims) != 4 or min(dims) < 1:
        raise UsageError("--dims needs four positive integers dA,dA',dB,dB'")
    return dims


def cmd_roundtrip(args, cfg: RunConfig) -> int:
    dims = _parse_dims(args.dims)
    if int(np.prod(dims)) > cfg.max_total_dim:
        raise UsageError(f"dims {dims} exceed max_total_dim {cfg.max_total_dim}")
    theory = ch.CLASSICAL if args.classical else ch.QUANTUM
    a, ap, b, bp = (SystemType.of(l, d) for l, d in zip(("a", "a'", "b", "b'"), dims))
    distances = []
    for k in range(cfg.trials):
        c = sm.random_comb(a, ap, b, bp, args.env_dim, [cfg.seed, k], theory)
        s = sm.comb_to_supermap(c)
        distances.append(lat.extract(lat.comb_oracle(c)).distance(s))
    worst = max(distances)
    ok = worst <= cfg.tol
    _emit(
        {
            "theory": theory.name,
            "dims": list(dims),
            "trials": cfg.trials,
            "seed": cfg.seed,
            "max_distance": worst,
            "tol": cfg.tol,
            "passed": ok,
        }
    )
    return EXIT_OK if ok else EXIT_REFUTED


# ---------------------------------------------------------------------------
# switch-demo

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.diag([1.0, -1.0]).astype(complex)
PLUS = np.full((2, 2), 0.5, dtype=complex)
MINUS = np.array([[0.5, -0.5], [-0.5, 0.5]], dtype=complex)


def control_output(switch: sm.MultiSupermap, u1, u2, control=PLUS, d: int = 2) -> np.ndarray:
    """Reduced control state after running the switch on unitaries ``u1, u2``
    with the system maximally mixed."""
    a1, a1p, a2, a2p = sm.switch_slots(d)
    out = switch.apply([ch.unitary_channel(u1, a1, a1p), ch.unitary_channel(u2, a2, a2p)])
    rho = ch.apply(out, np.kron(control, np.eye(d) / d))
    return np.einsum("ikjk->ij", rho.reshape(2, d, 2, d))


def _fidelity_pure(rho, target) -> float:
    # target is a pure projector
    return float(np.trace(rho @ target).real)


def switch_demo(trials: int, seed: int, tol: float) -> tuple[dict, bool]:
    quantum = sm.switch_supermap(2)
    classical = sm.switch_supermap(2, classical_control=True)
    u = ch.random_unitary(2, seed)
    xz_q = control_output(quantum, PAULI_X, PAULI_Z)
    uu_q = control_output(quantum, u, u)
    xz_c = control_output(classical, PAULI_X, PAULI_Z)
    hadamard = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    xz_c_xbasis = hadamard @ xz_c @ hadamard
    rep = sm.is_supermap(quantum.as_supermap(), trials, seed)
    facts = {
        "quantum_xz_minus": float(np.linalg.norm(xz_q - MINUS)) <= 1e-10,
        "quantum_uu_unchanged": float(np.linalg.norm(uu_q - PLUS)) <= 1e-10,
        "classical_xz_dephased": float(np.linalg.norm(xz_c_xbasis - np.eye(2) / 2)) <= 1e-10,
        "is_supermap": bool(rep),
    }

    def mat(m):
        return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]

    doc = {
        "quantum_switch": {
            "X,Z": {"control_output": mat(xz_q), "fidelity_minus": _fidelity_pure(xz_q, MINUS)},
            "U,U": {"control_output": mat(uu_q), "fidelity_plus": _fidelity_pure(uu_q, PLUS)},
        },
        "classical_switch": {"X,Z": {"control_output_x_basis": mat(xz_c_xbasis)}},
        "is_supermap": rep.to_dict(),
        "facts": facts,
    }
    return doc, all(facts.values())


def cmd_switch_demo(args, cfg: RunConfig) -> int:
    doc, ok = switch_demo(cfg.trials, cfg.seed, cfg.tol)
    doc["passed"] = ok
    _emit(doc)
    return EXIT_OK if ok else EXIT_REFUTED


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"JSON run config (default: ${CONFIG_ENV})")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--max-total-dim", type=int, dest="max_total_dim")

    p = argparse.ArgumentParser(prog="higherorder", description="Supermaps and locally-applicable transformations.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate-channel", parents=[common], help="check CP, TP and signaling constraints")
    v.add_argument("file")
    v.add_argument("--signaling", help="JSON relation {in_parties, out_parties, forbidden}")
    v.set_defaults(func=cmd_validate_channel)

    e = sub.add_parser("extract", parents=[common], help="extract the supermap of an oracle")
    e.add_argument("--oracle", required=True, help=f"built-in ({', '.join(sorted(BUILTINS))}) or comb/supermap file")
    e.add_argument("--output", "-o")
    e.set_defaults(func=cmd_extract)

    r = sub.add_parser("roundtrip", parents=[common], help="embed then extract random combs")
    r.add_argument("--dims", default="2,2,2,2", help="dA,dA',dB,dB'")
    r.add_argument("--env-dim", type=int, default=2, dest="env_dim")
    r.add_argument("--classical", action="store_true", help="use stochastic matrices")
    r.set_defaults(func=cmd_roundtrip)

    s = sub.add_parser("switch-demo", parents=[common], help="quantum and classical switch facts")
    s.set_defaults(func=cmd_switch_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.load(args.config)
        overrides = {k: getattr(args, k) for k in ("seed", "trials", "tol", "max_total_dim") if getattr(args, k) is not None}
        if args.command == "roundtrip" and "trials" not in overrides and cfg.trials == RunConfig.trials:
            overrides["trials"] = 25
        cfg = replace(cfg, **overrides)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

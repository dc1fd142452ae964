"""Bit-exact persistence: snapshot binary format, CSV/JSONL writers, manifests.

Snapshot layout (all little-endian):
  header   magic "SCBF" | version u32 | d, n, r, mu, beta, T, dt as f64 |
           output-time count u32
  body     per output time: timestamp f64, then the coefficient array as
           f64 pairs (re, im) in basis order (wavevector-major, then
           polarization)
  trailer  seed u64 | path index u64 | substep count u32 | Wiener
           increment block (substeps x modes, re/im f64) | jump count u32 |
           jump times f64 | jump marks f64
  crc      CRC-32 of every preceding byte, u32
"""

import hashlib
import json
import struct
import zlib

import numpy as np

from . import __version__
from .basis import SpectralField, build_basis
from .integrator import Trajectory
from .noise import NoiseRecord

MAGIC = b"SCBF"
VERSION = 1


class SnapshotError(ValueError):
    """Base class for snapshot read failures."""


class SnapshotTruncatedError(SnapshotError):
    """File shorter than its own structure claims."""


class SnapshotVersionError(SnapshotError):
    """Format version not supported by this reader."""


class SnapshotCRCError(SnapshotError):
    """Checksum mismatch: the payload is corrupt."""


def _complex_bytes(arr):
    flat = np.ascontiguousarray(arr, dtype=np.complex128).reshape(-1)
    pairs = np.empty(flat.size * 2, dtype="<f8")
    pairs[0::2] = flat.real
    pairs[1::2] = flat.imag
    return pairs.tobytes()


def _complex_from(buf, count):
    pairs = np.frombuffer(buf, dtype="<f8", count=2 * count)
    return (pairs[0::2] + 1j * pairs[1::2]).astype(np.complex128)


def write_snapshot(tr, path, cfg):
    """Serialize a completed trajectory; round trip is bitwise identical."""
    if tr.status != "completed":
        raise ValueError("refusing to snapshot a guard-tripped trajectory")
    rec = tr.record
    if rec.d != cfg.d or rec.n != cfg.n:
        raise ValueError("trajectory basis does not match the configuration")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    out += struct.pack("<7d", float(cfg.d), float(cfg.n), float(cfg.r),
                       float(cfg.mu), float(cfg.beta), float(cfg.T), float(cfg.dt))
    out += struct.pack("<I", len(tr.times))
    for t, state in zip(tr.times, tr.states):
        out += struct.pack("<d", float(t))
        out += _complex_bytes(state.coeffs)
    out += struct.pack("<QQ", int(rec.seed), int(rec.path_index))
    out += struct.pack("<I", rec.wiener.shape[0])
    out += _complex_bytes(rec.wiener)
    out += struct.pack("<I", rec.jump_times.size)
    out += np.ascontiguousarray(rec.jump_times, dtype="<f8").tobytes()
    out += np.ascontiguousarray(rec.jump_marks, dtype="<f8").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(bytes(out))


def read_snapshot(path):
    """Load a trajectory; raises distinct errors for CRC/truncation/version."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 + 4:
        raise SnapshotTruncatedError("file shorter than the fixed header")
    if raw[:4] != MAGIC:
        raise SnapshotError("bad magic; not a snapshot file")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != VERSION:
        raise SnapshotVersionError(f"format version {version}, expected {VERSION}")
    if len(raw) < 4:
        raise SnapshotTruncatedError("missing checksum")
    stored_crc = struct.unpack_from("<I", raw, len(raw) - 4)[0]
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != stored_crc:
        raise SnapshotCRCError("CRC-32 mismatch")

    off = 8
    try:
        d, n, r, mu, beta, T, dt = struct.unpack_from("<7d", raw, off)
        off += 7 * 8
        (n_out,) = struct.unpack_from("<I", raw, off)
        off += 4
        basis = build_basis(int(d), int(n))
        M, P = basis.n_wavevectors, basis.n_polarizations
        times = np.zeros(n_out)
        states = []
        for i in range(n_out):
            (times[i],) = struct.unpack_from("<d", raw, off)
            off += 8
            coeffs = _complex_from(raw[off:], M * P).reshape(M, P)
            off += M * P * 16
            states.append(SpectralField(basis, coeffs))
        seed, path_index = struct.unpack_from("<QQ", raw, off)
        off += 16
        (n_sub,) = struct.unpack_from("<I", raw, off)
        off += 4
        wiener = _complex_from(raw[off:], n_sub * M * P).reshape(n_sub, M, P)
        off += n_sub * M * P * 16
        (n_jumps,) = struct.unpack_from("<I", raw, off)
        off += 4
        jump_times = np.frombuffer(raw, dtype="<f8", count=n_jumps, offset=off).copy()
        off += n_jumps * 8
        jump_marks = np.frombuffer(raw, dtype="<f8", count=n_jumps, offset=off).copy()
        off += n_jumps * 8
    except (struct.error, ValueError) as exc:
        raise SnapshotTruncatedError(f"payload ended early: {exc}") from None
    if off != len(raw) - 4:
        raise SnapshotError("trailing bytes after the trailer")
    rec = NoiseRecord(seed=int(seed), path_index=int(path_index), d=int(d),
                      n=int(n), T=T, dt=dt, wiener=wiener,
                      jump_times=jump_times, jump_marks=jump_marks)
    return Trajectory(times=times, states=states, record=rec), \
        {"d": int(d), "n": int(n), "r": r, "mu": mu, "beta": beta, "T": T, "dt": dt}


def write_ledger_csv(ledger, path):
    """Ledger rows as RFC-4180 CSV with the documented column set."""
    import csv
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ledger.COLUMNS)
        for row in ledger.rows():
            writer.writerow([repr(float(x)) for x in row])


def write_jsonl(records, path):
    """One JSON object per line, keys sorted (byte-reproducible)."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def sha256_of(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(path, cfg, constants, files):
    """Self-contained run description: config echo, certified noise
    constants, tool version, and content hashes of every produced file."""
    from .config import config_to_dict
    doc = {
        "tool": "scbf",
        "version": __version__,
        "format_version": VERSION,
        "config": config_to_dict(cfg),
        "noise_constants": constants,
        "seed": cfg.seed,
        "files": {str(name): sha256_of(p) for name, p in files.items()},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def noise_constants(cfg):
    """Certified growth/moment/Lipschitz constants of the configured families."""
    basis = build_basis(cfg.d, cfg.n)
    q = cfg.qspectrum()
    sigma = cfg.sigma_family()
    gamma = cfg.gamma_family(basis)
    k1 = (sigma.growth_constant(q, basis) if sigma else 0.0) \
        + (gamma.growth_constant() if gamma else 0.0)
    k2 = gamma.fourth_moment_constant() if gamma else 0.0
    lip = (sigma.lipschitz_constant(q, basis) if sigma else 0.0) \
        + (gamma.lipschitz_constant() if gamma else 0.0)
    return {"K1": k1, "K2": k2, "L": lip, "trace_q": q.trace(basis)}

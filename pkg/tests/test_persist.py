import json

import numpy as np
import pytest

from scbf.config import RunConfig
from scbf.diagnostics import energy_ledger
from scbf.integrator import simulate_path
from scbf.persist import (SnapshotCRCError, SnapshotError,
                          SnapshotTruncatedError, SnapshotVersionError,
                          noise_constants, read_jsonl, read_snapshot,
                          sha256_of, write_jsonl, write_ledger_csv,
                          write_manifest, write_snapshot)


def make_traj(seed=3, T=0.5):
    cfg = RunConfig(d=2, n=4, r=3.0, T=T, dt=0.05, sigma_kind="additive",
                    sigma_a0=0.4, jump_intensity=4.0, gamma_c0=0.4,
                    gamma_c1=0.2, seed=seed,
                    output_times=(0.0, T / 2, T) if T else (0.0,))
    return cfg, simulate_path(cfg)


def test_round_trip_bitwise(tmp_path):
    cfg, tr = make_traj()
    path = tmp_path / "t.scbf"
    write_snapshot(tr, path, cfg)
    back, meta = read_snapshot(path)
    assert meta["d"] == 2 and meta["n"] == 4 and meta["r"] == 3.0
    assert np.array_equal(back.times, tr.times)
    for a, b in zip(tr.states, back.states):
        assert np.array_equal(a.coeffs, b.coeffs)
    assert back.record.equal(tr.record)
    # byte-for-byte reproducible writes
    path2 = tmp_path / "t2.scbf"
    write_snapshot(back, path2, cfg)
    assert path.read_bytes() == path2.read_bytes()


def test_single_byte_corruption_is_crc_error(tmp_path):
    cfg, tr = make_traj()
    path = tmp_path / "t.scbf"
    write_snapshot(tr, path, cfg)
    raw = bytearray(path.read_bytes())
    raw[len(raw) // 2] ^= 0x40
    path.write_bytes(bytes(raw))
    with pytest.raises(SnapshotCRCError):
        read_snapshot(path)


def test_truncated_file_error(tmp_path):
    cfg, tr = make_traj()
    path = tmp_path / "t.scbf"
    write_snapshot(tr, path, cfg)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 3])
    with pytest.raises((SnapshotTruncatedError, SnapshotCRCError)):
        read_snapshot(path)
    path.write_bytes(b"SC")
    with pytest.raises(SnapshotTruncatedError):
        read_snapshot(path)


def test_version_mismatch_distinct(tmp_path):
    import struct
    import zlib
    cfg, tr = make_traj()
    path = tmp_path / "t.scbf"
    write_snapshot(tr, path, cfg)
    raw = bytearray(path.read_bytes())
    raw[4:8] = struct.pack("<I", 99)
    body = bytes(raw[:-4])
    raw[-4:] = struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    path.write_bytes(bytes(raw))
    with pytest.raises(SnapshotVersionError):
        read_snapshot(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "junk.scbf"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(SnapshotError):
        read_snapshot(path)


def test_empty_horizon_minimal_file(tmp_path):
    cfg, tr = make_traj(T=0.0)
    path = tmp_path / "empty.scbf"
    write_snapshot(tr, path, cfg)
    back, _ = read_snapshot(path)
    assert np.array_equal(back.states[0].coeffs, tr.states[0].coeffs)
    assert back.record.wiener.shape[0] == 0


def test_replay_from_snapshot_reproduces_states(tmp_path):
    cfg, tr = make_traj(seed=8)
    path = tmp_path / "t.scbf"
    write_snapshot(tr, path, cfg)
    back, _ = read_snapshot(path)
    redo = simulate_path(cfg, record=back.record)
    for a, b in zip(tr.states, redo.states):
        assert np.array_equal(a.coeffs, b.coeffs)


def test_refuse_snapshot_of_tripped_run(tmp_path):
    cfg = RunConfig(d=2, n=4, guard_factor=1e-9, sigma_kind="additive",
                    sigma_a0=50.0, T=0.5, dt=0.1)
    tr = simulate_path(cfg)
    assert tr.status == "guard-tripped"
    with pytest.raises(ValueError):
        write_snapshot(tr, tmp_path / "x.scbf", cfg)


def test_ledger_csv_format(tmp_path):
    cfg, tr = make_traj()
    led = energy_ledger(tr, cfg)
    path = tmp_path / "ledger.csv"
    write_ledger_csv(led, path)
    lines = path.read_bytes().split(b"\r\n")  # RFC-4180 line endings
    header = lines[0].decode().split(",")
    assert header == ["time", "energy_H2", "diss_V", "diss_Lr1", "mart_wiener",
                      "mart_jump", "qv_sigma", "qv_gamma", "residual"]
    assert len([ln for ln in lines if ln]) == 1 + len(led.times)
    # full float precision survives the text round trip
    val = float(lines[1].decode().split(",")[1])
    assert val == led.energy_h2[0]


def test_jsonl_round_trip_and_stability(tmp_path):
    recs = [{"name": "a", "x": 1.5}, {"name": "b", "y": [1, 2]}]
    p1, p2 = tmp_path / "r1.jsonl", tmp_path / "r2.jsonl"
    write_jsonl(recs, p1)
    write_jsonl(recs, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert read_jsonl(p1) == recs


def test_manifest_sufficiency(tmp_path):
    # delete outputs, rerun from the manifest's config echo, hashes match
    cfg, tr = make_traj(seed=12)
    out1 = tmp_path / "run1"
    out1.mkdir()
    snap = out1 / "trajectory.scbf"
    write_snapshot(tr, snap, cfg)
    write_manifest(out1 / "manifest.json", cfg, noise_constants(cfg),
                   {"trajectory.scbf": snap})
    doc = json.loads((out1 / "manifest.json").read_text())
    stored_hash = doc["files"]["trajectory.scbf"]
    echo = doc["config"]
    echo["output_times"] = tuple(echo["output_times"])
    cfg2 = RunConfig(**echo)
    tr2 = simulate_path(cfg2)
    out2 = tmp_path / "run2"
    out2.mkdir()
    snap2 = out2 / "trajectory.scbf"
    write_snapshot(tr2, snap2, cfg2)
    assert sha256_of(snap2) == stored_hash
    assert doc["noise_constants"]["K1"] > 0

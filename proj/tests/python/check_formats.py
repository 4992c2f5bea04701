"""Reads the CLI's PRIQ/PSGM output with numpy alone and checks it against
the documented layout. Exit 77 (skip) when numpy is unavailable."""

import json
import os
import struct
import subprocess
import sys
import tempfile

try:
    import numpy as np
except ImportError:
    print("numpy not available, skipping")
    sys.exit(77)


def read_priq(path):
    with open(path, "rb") as f:
        raw = f.read()
    magic, version, rate, count = struct.unpack_from("<4sHdQ", raw, 0)
    assert magic == b"PRIQ", magic
    assert version == 1
    body = np.frombuffer(raw, dtype="<f4", offset=22)
    assert body.size == 2 * count, (body.size, count)
    return rate, body[0::2] + 1j * body[1::2]


def read_psgm(path):
    with open(path, "rb") as f:
        raw = f.read()
    magic, version, rows, cols, kind = struct.unpack_from("<4sHIIB", raw, 0)
    assert magic == b"PSGM", magic
    assert version == 1
    body = np.frombuffer(raw, dtype="<f4", offset=15)
    if kind == 1:
        assert body.size == 2 * rows * cols
        return (body[0::2] + 1j * body[1::2]).reshape(rows, cols)
    assert kind == 0
    assert body.size == rows * cols
    return body.reshape(rows, cols)


def main():
    cli = sys.argv[1]
    here = os.path.dirname(os.path.abspath(__file__))
    root = os.path.dirname(os.path.dirname(here))
    with tempfile.TemporaryDirectory() as tmp:
        scn = json.load(open(os.path.join(root, "config", "scenario_breathing.json")))
        scn["duration"] = 2.0
        scn["clutter"] = [[], []]
        cfg = os.path.join(tmp, "scn.json")
        json.dump(scn, open(cfg, "w"))

        subprocess.run([cli, "synth", "--config", cfg, "--out", tmp], check=True)
        rate, ref = read_priq(os.path.join(tmp, "ref.priq"))
        _, sur = read_priq(os.path.join(tmp, "sur1.priq"))
        assert rate == 125000.0
        assert ref.size == 250000
        assert os.path.getsize(os.path.join(tmp, "ref.priq")) == 22 + 8 * ref.size

        est = os.path.join(tmp, "est.json")
        json.dump({"presence_threshold": {"1": 1.0, "2": 1.0}}, open(est, "w"))
        subprocess.run([cli, "pipeline", "--config", cfg, "--estimator", est, "--window", "2", "--out", tmp], check=True)
        caf = read_psgm(os.path.join(tmp, "caf1.psgm"))
        cfar = read_psgm(os.path.join(tmp, "cfar1.psgm"))
        side = json.load(open(os.path.join(tmp, "caf1.psgm.json")))
        assert caf.shape == (20, 1024), caf.shape
        assert cfar.shape == caf.shape
        assert set(np.unique(cfar)) <= {0.0, 1.0}
        zero = side["zero_bin"]
        assert zero == 512

        # Rebuild one CIT from the captures: least-squares clutter
        # cancellation on 32 reference delays, then the CAF at each Doppler
        # bin keeping the largest-magnitude delay 0..4.
        n = int(round(0.1 * rate))
        for cit in (0, 13):
            y = sur[cit * n:(cit + 1) * n].astype(complex)
            x = ref[cit * n:(cit + 1) * n].astype(complex)
            v = np.stack([np.concatenate([np.zeros(p, complex), x[: n - p]]) for p in range(32)], axis=1)
            w, *_ = np.linalg.lstsq(v, y, rcond=None)
            e = y - v @ w
            bins = (np.arange(1024) - zero) % n
            best = np.zeros(1024)
            for tau in range(5):
                spec = np.abs(np.fft.fft(e * np.conj(v[:, tau])))[bins]
                best = np.maximum(best, spec)
            got = np.abs(caf[cit])
            err = np.max(np.abs(got - best)) / np.max(best)
            assert err < 1e-3, (cit, err)
    print("PRIQ/PSGM numpy reader: ok")


if __name__ == "__main__":
    main()

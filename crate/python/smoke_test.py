"""Smoke test for the `dipolar` extension module.

Build first, e.g. `maturin develop -m crates/python/Cargo.toml`, or copy
`target/<profile>/libdipolar.so` to `dipolar.so` somewhere on PYTHONPATH.
"""

import json
import math
import pathlib
import sys
import tempfile

import dipolar

ROOT = pathlib.Path(__file__).resolve().parent.parent


def check(cond, msg):
    if not cond:
        print(f"FAIL: {msg}")
        sys.exit(1)
    print(f"ok: {msg}")


def main():
    m = dipolar.CouplingModel()
    j = m.coupling((0.0, 0.0), (1.0, 0.0))
    check(j < 0, f"side-by-side coupling at 1 mm is negative ({j:.2f})")
    r0 = m.zero_distance()
    check(r0 is not None and 3.0 < r0 < 4.0, f"cancellation distance {r0:.4f} mm")

    obs = dipolar.ladder_observables(8, 100.0, 0.5)
    check(math.isclose(abs(obs["Bz"]), 0.25, abs_tol=1e-8), "Majumdar-Ghosh point has |Bz| = 1/4")

    scan = dipolar.disorder_scan(6, 100.0, 0.5, [0.0, 20.0], 4, seed=1)
    check(len(scan) == 2 and "abs_Bz" in scan[1][1], "disorder scan returns both grid points")

    tr = dipolar.ramp(4, 100.0, 0.5, samples=5)
    check(len(tr["Bz"]) == 5, "ramp returns sampled trajectory")

    jc = dipolar.circuit_coupling((0.0, 0.0), (1.5, 0.0), cavity=False)
    check(jc != 0.0, f"circuit coupling {jc:.3f}")

    kinds = [k for k, _ in dipolar.list_experiments()]
    check("ramp" in kinds and "scan-j2" in kinds, "experiments listed")
    check(dipolar.validate_config(str(ROOT / "configs" / "scan_j2.toml")) == "scan-j2", "config validates")

    with tempfile.TemporaryDirectory() as d:
        manifest = json.loads(dipolar.run_config(str(ROOT / "configs" / "scan_j2.toml"), output_dir=d))
        check((pathlib.Path(d) / "scan_j2.csv").is_file(), "runner writes scan_j2.csv")
        check(manifest["kind"] == "scan-j2", "manifest records the kind")

    try:
        dipolar.ladder_observables(40, 100.0, 0.5)
    except ValueError as e:
        check(True, f"oversized system rejected: {e}")
    else:
        check(False, "oversized system rejected")


if __name__ == "__main__":
    main()

"""Regenerate the frozen Hankel reference table with mpmath (300 digits).

Run from the repository root:  python3 tests/gen_hankel_fixture.py
"""

import json
import pathlib

import mpmath as mp

# generous precision: hankel1 = J + iY cancels ~ e^{2|Im z|} digits high on
# the imaginary axis, so 50 digits is not enough near z = 200i
mp.mp.dps = 300

MAGNITUDES = [1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 5.0, 11.0, 13.0, 30.0, 80.0, 200.0]
PHASES_DEG = [0, 30, 90, 150, 175]  # closed upper half plane, off the branch cut

rows = []
for mag in MAGNITUDES:
    for deg in PHASES_DEG:
        theta = mp.pi * deg / 180
        z = mp.mpc(mag * mp.cos(theta), mag * mp.sin(theta) if deg else 0)
        for order in (0, 1):
            h = mp.hankel1(order, z)
            rows.append(
                {
                    "order": order,
                    "z_re": float(mp.re(z)),
                    "z_im": float(mp.im(z)),
                    "h_re": float(mp.re(h)),
                    "h_im": float(mp.im(h)),
                }
            )

out = pathlib.Path(__file__).parent / "data" / "hankel_reference.json"
out.parent.mkdir(exist_ok=True)
out.write_text(json.dumps(rows, indent=1))
print(f"wrote {len(rows)} rows to {out}")

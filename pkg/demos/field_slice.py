"""Point-source field on a vertical plane through the source (source at depth 50).

Writes ``field.csv`` in the working directory and prints a coarse text picture of
|G| so the layered structure is visible without plotting tools.
Run with ``python3 demos/field_slice.py``.
"""

import numpy as np

from stratwave import cli, scenario as scn

sc = scn.preset("point-source")
g, text = cli.field_slice(sc, "y=0", span=(-150.0, 150.0), n_h=61, n_z=21)
with open("field.csv", "w") as fh:
    fh.write(text)

mag = np.abs(g).T
shades = " .:-=+*#%@"
scale = np.log10(mag.max())
print("x3 (rows, 0 at top) against x from -150 to 150; darker is louder")
for z, row in zip(np.linspace(0, 100, 21), mag):
    level = np.clip((np.log10(np.maximum(row, 1e-300)) - scale + 3) / 3, 0, 0.999)
    print(f"{z:5.0f} " + "".join(shades[int(v * len(shades))] for v in level))

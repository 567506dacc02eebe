"""
The command-line pipeline
=========================

The same steps from the shell, driven here through ``saabkit.cli.run``.
Each call corresponds to one ``saabkit <subcommand>`` invocation.
"""

from pathlib import Path

from saabkit.cli import run

out = Path("demo_output")
out.mkdir(exist_ok=True)


def sh(*argv):
    print("$ saabkit", " ".join(str(a) for a in argv))
    status = run([str(a) for a in argv])
    assert status == 0, status


# %%
sh("gen", "--n", 4, "--rho", 0.95, "--count", 50000, "--seed", 7, "--out", out / "ar1.sblk")
sh("fit", "--kind", "saab", "--plan", "2x2", "--in", out / "ar1.sblk", "--out", out / "saab22.json", "--seed", 7)
sh("fit", "--kind", "saab", "--plan", "4", "--in", out / "ar1.sblk", "--out", out / "saab4.json", "--seed", 7)
sh("fit", "--kind", "dct", "--n", 4, "--out", out / "dct4.json")

# %%
kernels = ["--kernel", out / "dct4.json", "--kernel", out / "saab4.json", "--kernel", out / "saab22.json"]
sh("analyze", "--in", out / "ar1.sblk", *kernels, "--out", out / "table.csv")
sh("curve", "--in", out / "ar1.sblk", *kernels, "--out", out / "curve.csv")
print((out / "table.csv").read_text())

# %%
sh("viz", "--in", out / "saab22.json", "--columns", 8, "--ordering", "energy", "--out", out / "saab22.pgm")
sh("roundtrip", "--kernel", out / "saab22.json", "--in", out / "ar1.sblk")

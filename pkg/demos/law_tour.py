"""Tour of the cohesive traction-separation law.

Prints the density, traction and stored/dissipated split of the prototype
law along a load-unload-reload opening path, and shows what the derived
constants mean.  If matplotlib is available, saves law_tour.png next to this
script.

Run:  python3 demos/law_tour.py
"""

import numpy as np

from cohesim import CohesiveLaw, PrototypeEnvelope

law = CohesiveLaw(PrototypeEnvelope(g_c=1.0, xi_c=1.0))
c = law.constants

print("prototype law, g_c = 1, xi_c = 1")
print(f"  activation threshold  psi_hat'(0) = {c.psi_prime_0}")
print(f"  curvature bound       beta        = {c.beta}")
print(f"  convexity offset      lambda      = {c.lambda_conv}")
print(f"  H3 (concave slope)    {c.h3_holds}")
print()

# the pristine state (0, 0) only has one-sided slopes: the traction an
# unbroken interface can sustain in either direction is the threshold
print("one-sided slopes at the origin:",
      law.dpsi_dw_directional(0.0, 0.0, +1.0),
      law.dpsi_dw_directional(0.0, 0.0, -1.0))
print()

# opening history: load to 0.6, unload to 0.1, reload to 0.8
path = np.concatenate([np.linspace(0.1, 0.6, 6), np.linspace(0.5, 0.1, 5),
                       np.linspace(0.2, 0.8, 7)])
xi = 0.0
print(f"{'w':>6} {'xi':>6} {'psi':>8} {'traction':>9} {'stored':>8} {'dissip':>8}")
for w in path:
    xi = max(xi, abs(w))
    s, d = law.split(w, xi)
    tr = law.dpsi_dw(w, xi)
    print(f"{w:6.2f} {xi:6.2f} {law.psi(w, xi):8.4f} {tr:9.4f} {s:8.4f} {d:8.4f}")

print()
print("note how unloading returns along the secant line through the origin")
print("while the dissipated part psi_d only ever grows.")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    w_grid = np.linspace(0.0, 1.4, 300)
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 3.5))
    for xi_fixed in (0.0, 0.3, 0.7, 1.0):
        ax0.plot(w_grid, law.psi(w_grid, np.maximum(xi_fixed, 0.0)),
                 label=f"xi = {xi_fixed}")
        tr = [law.dpsi_dw(w, xi_fixed) if (w, xi_fixed) != (0.0, 0.0) else 0.0
              for w in w_grid]
        ax1.plot(w_grid, tr, label=f"xi = {xi_fixed}")
    ax0.set_title("density psi(w, xi)")
    ax1.set_title("traction dpsi/dw")
    for ax in (ax0, ax1):
        ax.set_xlabel("opening w")
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(__file__.replace(".py", ".png"), dpi=120)
    print("wrote law_tour.png")
except ImportError:
    pass

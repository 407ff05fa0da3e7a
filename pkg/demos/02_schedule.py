"""The theoretical parameter schedule and its sufficient conditions.

Run with ``python demos/02_schedule.py``.
"""
from canita.schedule import generate, theorem2_params, validate_theorem1

for omega, n in [(0, 1), (3, 20), (10, 1000)]:
    sp = theorem2_params(omega, n, L=1.0)
    rounds = generate(sp, 2000)
    print(f"omega={omega:<3} n={n:<5} b={sp.b:.4f} p={sp.p:.3f} alpha={sp.alpha:.3f} gamma={sp.gamma:.4f} "
          f"beta={sp.beta:.3f}")
    for t in (0, 1, 10, 100, 2000):
        r = rounds[t]
        print(f"    t={t:<5} theta={r.theta:.5f} eta={r.eta:.5f}")
    print("   ", validate_theorem1(rounds, omega, n, 1.0).summary())

# %% a hand-made schedule that breaks the shift-stepsize bound
from dataclasses import replace

sp = theorem2_params(1, 1, 1.0)
bad = [replace(r, alpha=1.0) for r in generate(sp, 10)]
print("\nalpha = 1 with omega = 1:", validate_theorem1(bad, 1, 1, 1.0).summary())

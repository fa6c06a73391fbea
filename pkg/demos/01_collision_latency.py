# %% [markdown]
# How much does reflex latency cost in a collision?
#
# A soft fingertip (mass m_r on a spring k) hits something at v0.  After
# t_l seconds the controller starts pulling back with F_in.  eta is the
# impulse the obstacle feels relative to doing nothing at all.

# %%
import numpy as np

from fingertip.collision import CollisionParams, collision_end_time, impulse_ratio, solve, sweep_eta

p = CollisionParams()
print(p)
print(f"half period {p.half_period * 1e3:.2f} ms, contact ends at {collision_end_time(p) * 1e3:.2f} ms")
print(f"eta at the nominal 7 ms latency: {impulse_ratio(p):.3f}")

# %% Sweep latency at the nominal stiffness
for tl in (0.0, 0.002, 0.004, 0.007, 0.010, 0.015, 0.020):
    print(f"t_l = {tl * 1e3:5.1f} ms   eta = {impulse_ratio(p.with_(t_l=tl)):.3f}")

# %% [markdown]
# Stiffer skin shortens the contact, so a fixed latency eats a larger part of
# it.  Past t_l = pi/omega0 the reflex never gets a say and eta is exactly 1.

# %%
rows = sweep_eta(np.logspace(2, 5, 7), [0.007], [p.v0], p)
for r in rows:
    print(f"k = {r.k:9.1f} N/m   eta = {r.eta:.3f}   {r.status}")

# %% The trajectory itself
res = solve(p, n_samples=9)
for t, x, f in res.trajectory:
    print(f"{t * 1e3:6.2f} ms   x = {x * 1e3:+.3f} mm   F = {f:+.2f} N")

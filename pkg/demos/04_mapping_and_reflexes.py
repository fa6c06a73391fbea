# %% [markdown]
# Sweeping a three-walled room with the proximity rays, then letting the
# fingertip react to things on its own.

# %%
import numpy as np

from fingertip.collision import CollisionParams, impulse_ratio
from fingertip.mapping import map_scene, sweep_poses, three_wall_room
from fingertip.reactive import approach_scene, collision_scene, following_scene

walls, objects = three_wall_room()
poses = sweep_poses()
full, _ = map_scene(poses, walls + objects)
empty, _ = map_scene(poses, walls)
print(len(full.occupied()), "occupied 1 cm cells with both boxes present")

# %% Take the boxes away and look at what changed
gone = full.occupied() - empty.occupied()
centers = full.lower + (np.array(sorted(gone)) + 0.5) * 0.01
print(len(gone), "cells vanished, centred near x =", np.round(np.unique(np.round(centers[:, 0], 2)), 2))

# %% [markdown]
# Reflexes.  First the collision again, this time stepped through a penalty
# contact model instead of the closed form.

# %%
for tl in (0.0, 0.007, 0.015):
    p = CollisionParams(t_l=tl)
    eta_sim, _ = collision_scene(p)
    print(f"t_l {tl * 1e3:4.1f} ms   simulated {eta_sim:.3f}   analytic {impulse_ratio(p):.3f}")

# %% A box drops towards the sensor; the potential field backs away from it
on, off = approach_scene(field_on=True), approach_scene(field_on=False)
print(f"closest approach: {on.clearance.min() * 1e3:.1f} mm with the field, {off.clearance.min() * 1e3:.1f} mm without")

# %% Keeping 2 N on a plane that someone is waving around
log = following_scene()
f = np.linalg.norm(log.contact_force[log.t > 0.5], axis=1)
print(f"in contact {log.contact_flag.mean():.0%} of the time, force {f.min():.2f} to {f.max():.2f} N")

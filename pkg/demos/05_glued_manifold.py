"""R^4 minus the origin cut along the unit sphere and reassembled.

The outside is an end, the inside a singular region. Their local identities
each involve the boundary term on the cut; glued with the same orientation
the boundary terms cancel and the global deficit reappears. A spec with two
flat ends and Euler characteristic 0 is inconsistent and is flagged.
"""

from qcurv import ManifoldSpec, catalog, manifold_assemble, pieces_from_profile, subtraction_check

for e in (catalog.cone(3.0), catalog.bump_normal(0.8, 0.0, 1.0, 0.0)):
    rep = manifold_assemble(pieces_from_profile(e.profile))
    diff, res = subtraction_check(e.profile, 0.5)
    print(f"{e.id:12s} residual={rep.residual:.1e} boundary mismatch={rep.boundary_mismatch:.1e} "
          f"end-sing={diff:.2e} deficit={res:.2e}")

flat = catalog.euclidean().profile
bad = manifold_assemble(ManifoldSpec(chi=0, ends=[flat, flat]))
print("two flat ends, chi=0:", bad.residual, bad.warnings)

"""End-to-end smoke test of the spectree Python module.

Build and install the extension first:

    pip install --no-build-isolation ./crates/python

then run `python python/smoke_test.py`. Exits non-zero on the first failure.
"""

import json
import math
import os
import sys
import tempfile

import spectree


def check(cond, message):
    if not cond:
        print(f"FAIL: {message}")
        sys.exit(1)
    print(f"ok: {message}")


def cube_mesh():
    vertices = [(x, y, z) for x in (-1.0, 1.0) for y in (-1.0, 1.0) for z in (-1.0, 1.0)]
    faces = [
        (0, 1, 3), (0, 3, 2), (4, 6, 7), (4, 7, 5),
        (0, 4, 5), (0, 5, 1), (2, 3, 7), (2, 7, 6),
        (0, 2, 6), (0, 6, 4), (1, 5, 7), (1, 7, 3),
    ]
    return spectree.Mesh(vertices, faces)


def main():
    # Synthesis and curation.
    params = json.loads(spectree.example_params(3))
    params["depth"] = 3
    mesh, motion = spectree.synthesize_tree(json.dumps(params))
    check(mesh.vertex_count > 0 and mesh.face_count > 0, f"synthesized {mesh!r}")
    check(motion.vertex_count == mesh.vertex_count, f"motion matches mesh: {motion!r}")

    grid = spectree.VoxelGrid(mesh, 64)
    check(0 < grid.voxel_count <= mesh.vertex_count, f"voxelized: {grid!r}")
    check(len(grid.vertex_to_voxel) == mesh.vertex_count, "vertex→voxel map covers every vertex")
    hf, accepted = spectree.curate_motion(motion, grid)
    check(accepted and 0.0 <= hf <= 0.1, f"curation accepts the sample (hf ratio {hf:.4f})")

    # More bins never reconstruct worse.
    shared = grid.voxel_shared(motion)
    half = motion.frames // 2
    full = spectree.compress(shared, grid, half)
    check(full.voxel_count == grid.voxel_count and full.bins == half, f"compressed: {full!r}")
    spectrum = spectree.compress(shared, grid, 16)
    err_full = full.reconstruct().relative_l2_error(shared)
    err_16 = spectrum.reconstruct().relative_l2_error(shared)
    check(err_full <= err_16 < 0.1, f"reconstruction error K=16 {err_16:.2e}, K=T/2 {err_full:.2e}")
    check(spectrum.lss() >= 0.0, "lss is non-negative")
    re, im = spectrum.coefficient(0, 0)[0]
    check(math.isfinite(re) and abs(im) < 1e-9, "DC coefficient is real")

    # File round trips.
    with tempfile.TemporaryDirectory() as tmp:
        mesh_path = os.path.join(tmp, "tree.obj")
        svsp_path = os.path.join(tmp, "tree.svsp")
        motion_path = os.path.join(tmp, "tree.motn")
        mesh.save(mesh_path)
        spectrum.save(svsp_path)
        motion.write(motion_path)
        loaded = spectree.Mesh.load(mesh_path)
        again = spectree.Spectrum.load(svsp_path, loaded)
        check(again.bins == 16 and again.frames == motion.frames, "spectrum file round trip")
        check(spectree.Motion.read(motion_path).frames == motion.frames, "motion file round trip")
        try:
            spectree.Mesh.load(os.path.join(tmp, "missing.obj"))
            check(False, "missing file raises")
        except OSError:
            check(True, "missing file raises OSError")

    # Splats follow the mesh.
    cube = cube_mesh()
    cloud = spectree.GaussianCloud(cube, 2)
    check(len(cloud) == 2 * cube.face_count, "two splats per face")
    shifted = [(x + 0.5, y, z) for x, y, z in cube.vertices]
    pose = cloud.pose(shifted)
    rest = cloud.rest_pose()
    moved = all(abs(a[0] - b[0] - 0.5) < 1e-12 for a, b in zip(pose.means, rest.means))
    check(moved and not any(pose.frozen), "translation moves every mean")
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "splats.ply")
        cloud.export(pose, path)
        check(os.path.getsize(path) > 0, "splat PLY written")

    # Interactive session: rest at first, then a force moves the tree.
    session = spectree.Session(mesh, spectrum)
    frame = session.step()
    check(frame.index == 1 and frame.kind == "vertices", "first frame")
    check(len(frame.payload) == 3 * mesh.vertex_count, "vertex payload size")
    start, force = session.apply_force(0, (0.0, 0.0, 5.0), 0.2)
    check(force == [0.0, 0.0, 5.0], "force acknowledged")
    last = session.run(30)
    check(last.index == 31 and session.modal_energy() > 0.0, "force excites the modes")
    rest_positions = [c for v in mesh.vertices for c in v]
    moved = max(abs(a - b) for a, b in zip(last.payload, rest_positions))
    check(moved > 0.0, f"vertices moved (max {moved:.3e})")
    snapshot = json.loads(session.snapshot_json())
    check(snapshot["voxel_count"] == grid.voxel_count, "snapshot describes the scene")

    try:
        spectree.Session(mesh, spectrum, dt=1.0)
        check(False, "unstable dt rejected")
    except ValueError:
        check(True, "unstable dt raises ValueError")

    splat_session = spectree.Session(mesh, spectrum, payload="splats", per_face=1)
    frame = splat_session.step()
    check(len(frame.payload) == 10 * mesh.face_count, "splat payload size")

    print("smoke test passed")


if __name__ == "__main__":
    main()

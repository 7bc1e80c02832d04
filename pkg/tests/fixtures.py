"""Hand-built metric fixtures shared by the unit and acceptance tests."""
from fasttracker.geometry import Box
from fasttracker.mot_io import GroundTruthBox, TrackRecord

A = Box(0, 0, 10, 20)
B = Box(100, 0, 10, 20)
FAR = Box(500, 500, 10, 20)


def five_frame_fixture():
    """Two gt objects over five frames (10 rows).

    Object 1 is tracked as id 1 throughout.  Object 2 is tracked as id 2 in
    frames 1-2, missed in frames 3-4 and picked up as id 3 in frame 5.  A
    stray box appears in frame 1.  Hand count: FP 1, FN 2, IDSW 1.
    """
    gt = [GroundTruthBox(f, gid, box) for f in range(1, 6) for gid, box in ((1, A), (2, B))]
    res = [TrackRecord(f, 1, A, 1.0) for f in range(1, 6)]
    res += [TrackRecord(1, 2, B, 1.0), TrackRecord(2, 2, B, 1.0), TrackRecord(5, 3, B, 1.0)]
    res.append(TrackRecord(1, 9, FAR, 1.0))
    return gt, res


def half_split_fixture(length=10):
    """One gt identity; pred id 1 covers the first half, id 2 the second."""
    gt = [GroundTruthBox(f, 1, A) for f in range(1, length + 1)]
    half = length // 2
    res = [TrackRecord(f, 1 if f <= half else 2, A, 1.0) for f in range(1, length + 1)]
    return gt, res

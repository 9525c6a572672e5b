"""Generate the NEDC speed table (1 s sampling) as time,speed_kmh CSV."""
import sys

# (duration_s, end_speed_kmh); speed ramps linearly from the previous end speed.
ECE = [(11, 0), (4, 15), (8, 15), (2, 10), (3, 0), (21, 0), (5, 15), (2, 15), (5, 32),
       (24, 32), (8, 10), (3, 0), (21, 0), (5, 15), (2, 15), (9, 35), (2, 35), (8, 50),
       (12, 50), (8, 35), (13, 35), (2, 32), (7, 10), (3, 0), (7, 0)]
EUDC = [(20, 0), (5, 15), (2, 15), (9, 35), (2, 35), (8, 50), (2, 50), (13, 70), (50, 70),
        (8, 50), (69, 50), (13, 70), (50, 70), (35, 100), (30, 100), (20, 120), (10, 120),
        (16, 80), (8, 50), (10, 0), (20, 0)]


def profile():
    speeds = [0.0]
    for segment in ECE * 4 + EUDC:
        duration, end = segment
        start = speeds[-1]
        for k in range(1, duration + 1):
            speeds.append(start + (end - start) * k / duration)
    return speeds


def main():
    speeds = profile()
    out = sys.stdout
    out.write("time,speed_kmh\n")
    for t, v in enumerate(speeds):
        out.write(f"{t},{v:.4f}\n".replace(".0000", ""))
    dist = sum((speeds[i] + speeds[i + 1]) / 2 / 3.6 for i in range(len(speeds) - 1)) / 1000
    print(f"rows={len(speeds)} distance_km={dist:.4f}", file=sys.stderr)


if __name__ == "__main__":
    main()

# Regenerates rng_vectors.txt from a from-scratch Python implementation of the
# key packing and splitmix64 mixing, so the Rust side is checked against an
# independent source rather than against itself.
import random
import struct

M = (1 << 64) - 1


def splitmix64(x):
    z = (x + 0x9E3779B97F4A7C15) & M
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M
    return z ^ (z >> 31)


def rotl(x, r):
    return ((x << r) | (x >> (64 - r))) & M


def main():
    r = random.Random(20261015)
    lines = [
        "# seed pixel sample bounce dimension -> bits value_f64_bits",
        "# generated by an independent reference implementation",
    ]
    keys = [
        (0, 0, 0, 0, 0), (7, 0, 0, 0, 0), (7, 1, 0, 0, 0), (7, 0, 1, 0, 0),
        (7, 0, 0, 1, 0), (7, 0, 0, 0, 1), (M, 2**32 - 1, 2**32 - 1, 255, 255), (1, 65535, 65536, 3, 4),
    ]
    while len(keys) < 64:
        keys.append((r.getrandbits(64), r.getrandbits(32), r.randrange(1 << 20), r.randrange(256), r.randrange(256)))
    for seed, p, s, b, d in keys:
        counter = p ^ ((d & 0xFF) << 32) ^ ((b & 0xFF) << 40) ^ rotl(s, 48)
        bits = splitmix64(splitmix64(seed) ^ counter)
        v = (bits >> 11) * (1.0 / (1 << 53))
        vb = struct.unpack("<Q", struct.pack("<d", v))[0]
        lines.append(f"{seed} {p} {s} {b} {d} {bits:016x} {vb:016x}")
    with open("rng_vectors.txt", "w") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()

"""
A stand-in model process for the line protocol
==============================================

Reads ``INFER <side> <outport> <path>`` lines on stdin and answers with a
latency that grows with the input side and exit depth.  Try::

    abranch run --trace t/manifest.txt --profiles p --log out.csv \
        --connect "exec:python demos/toy_responder.py"
"""

import sys
import time

LABELS = "car,bus,truck,train,bicycle"

for line in sys.stdin:
    parts = line.split()
    if len(parts) != 4 or parts[0] != "INFER":
        print("ERR bad-request", flush=True)
        continue
    side, outport = int(parts[1]), int(parts[2])
    ms = 0.05 * side * (1 + 0.2 * outport) / 10
    time.sleep(ms / 1000)
    print(f"OK {ms:.2f} {LABELS}", flush=True)

"""Drive a transmitter into bus-off with injected faults, then watch it
recover after 128 runs of 11 recessive bits and deliver the queued frame.

Every corrupted attempt adds 8 to the transmit error counter: 16 attempts
reach error-passive (128), 32 reach bus-off (256).
"""

from vcanlab import Bus, BusConfig, ScheduleEntry, data_frame, encode_frame
from vcanlab.scenario import format_trace_event

frame = data_frame(0x123, bytes(range(8)))
stream = encode_frame(frame).stuffed_bits

bus = Bus(BusConfig())
bus.attach_node("victim")
bus.attach_node("observer")

d = 50  # corrupt bit 50 of every attempt; each retry starts 4 bits later
for attempt in range(32):
    bus.inject_fault(attempt * (d + 4) + d, stream[d] ^ 1)

trace = bus.run([ScheduleEntry(0, "victim", frame)], 32 * (d + 4) + 2_500)

for event in trace:
    if event.kind.value in ("BusOffEntered", "BusOffRecovered", "FrameDelivered"):
        print(format_trace_event(event))

print()
for line in bus.status_lines():
    print(line)

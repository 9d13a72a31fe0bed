"""Two nodes start transmitting in the same bit time; the lower identifier
wins arbitration and the loser retries automatically, losing nothing.
"""

from vcanlab import Bus, BusConfig, ScheduleEntry, data_frame
from vcanlab.scenario import format_trace_event

bus = Bus(BusConfig())
bus.attach_node("ecu-a")
bus.attach_node("ecu-b")

schedule = [
    ScheduleEntry(0, "ecu-a", data_frame(0x100, b"\x01\x02")),
    ScheduleEntry(0, "ecu-b", data_frame(0x0A0, b"\xde\xad\xbe\xef")),
]

print("0x0A0 outranks 0x100, so ecu-b goes first even though both")
print("started in the same bit time:\n")
for event in bus.run(schedule, 5_000):
    print(format_trace_event(event))

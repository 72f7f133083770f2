"""
Driver-style memcpy with chain throttling
=========================================

A client queues many small copies.  The driver batches them into chains,
keeps at most four chains launched and runs callbacks from its IRQ handler.
"""

from dmacsim import PRESETS, MemoryConfig, Testbench
from dmacsim.driver import DmaDriver

tb = Testbench(PRESETS["speculation"], MemoryConfig(one_way_latency=13))
driver = DmaDriver(tb, arena_base=0x1000, arena_size=0x10000, max_chains=4)

finished = []
for chain in range(10):
    handles = []
    for k in range(3):
        i = 3 * chain + k
        tb.memory.backdoor_write(0x100000 + 0x1000 * i, bytes([i]) * 512)
        handles.append(driver.prepare_memcpy(0x100000 + 0x1000 * i, 0x400000 + 0x1000 * i,
                                             512, want_irq=True,
                                             callback=lambda h: finished.append(h.ident)))
    driver.commit(handles)
driver.issue()
print(f"launched {driver.csr_writes} chains, {len(driver.deferred)} waiting")

end = driver.run()
print(f"all done at cycle {end}: {len(finished)} callbacks, peak {driver.peak_active} chains, "
      f"{tb.frontend.irq_count} interrupts")

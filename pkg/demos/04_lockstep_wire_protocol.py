"""The co-simulation boundary: a client owning time over UDP, via the relay.

Starts an engine server and the datagram relay in background threads, then
drives the session the way a system simulator would: Hello, lockstep
StepTo/StepDone, live position updates, channel fetches (chunk-reassembled
transparently) and a clean Shutdown.
"""

import pathlib
import threading

import numpy as np

from lusim.cli import _load_bundle
from lusim.engine import assemble_engine
from lusim.link import ProxyRelay, UdpEngineClient, engine_serve


class Args:
    data = pathlib.Path(__file__).parent / "data"
    gscm = str(data / "gscm.json")
    radio = str(data / "radio.json")
    scenario = str(data / "scenario.json")


bundle = _load_bundle(Args)
engine = assemble_engine(bundle.gscm, bundle.radio, bundle.scenario, bundle.scene)
print(f"engine ready: {len(engine.mpcs)} scatterers, "
      f"{len(engine.bs_ids)} BS / {len(engine.ue_ids)} UE")

ready = threading.Event()
bound: list = []
server = threading.Thread(target=engine_serve, args=(engine,),
                          kwargs={"endpoint": ("127.0.0.1", 0), "ready": ready, "bound": bound},
                          daemon=True)
server.start()
ready.wait()
engine_endpoint = bound[0]

relay = ProxyRelay(("127.0.0.1", 0), engine_endpoint)
relay_ready = threading.Event()
relay_bound: list = []
relay_thread = threading.Thread(target=relay.serve,
                                kwargs={"ready": relay_ready, "bound": relay_bound}, daemon=True)
relay_thread.start()
relay_ready.wait()
print(f"engine at {engine_endpoint}, relay at {relay_bound[0]}")

with UdpEngineClient(relay_bound[0]) as client:
    client.hello()
    for t in (0.1, 0.2, 0.3):
        confirmed = client.step_to(t)
        print(f"StepTo({t}) -> StepDone({confirmed})")

    tx_id, rx_id, ts, h = client.get_channel(0, 10)
    print(f"channel {tx_id}->{rx_id} at t={ts}: H {h.shape}, "
          f"mean power {np.mean(np.abs(h) ** 2):.3e}")

    client.set_position(10, (60.0, 90.0, 1.5), (0.0, 1.0, 0.0))
    client.step_to(0.4)  # queued position applies on this step
    positions = client.get_positions()
    ue = next(p for p in positions if p[0] == 10)
    print(f"after SetPosition: UE 10 at {ue[2]} moving {ue[3]}")

    client.set_param("max_path_length", 80.0)
    _, _, _, h2 = client.get_channel(0, 10)
    print(f"after tightening max_path_length: mean power {np.mean(np.abs(h2) ** 2):.3e}")

    client.shutdown()
print(f"relay forwarded {relay.forwarded_to_engine} up / {relay.forwarded_to_client} down, "
      f"dropped {relay.dropped}")
server.join(2.0)
relay.stop()
relay_thread.join(2.0)
print("clean shutdown")

/** Wire shapes of the /v1 gateway, as the portal consumes them. */

export type ResourcePath = "OverTheAir" | "Emulator";

export type NodeState = "Idle" | "Reserved" | "Active" | "Fault";

export interface Channel {
  center_hz: number;
  bw_hz: number;
}

export interface LicensedBand {
  label: string;
  low_hz: number;
  high_hz: number;
}

export interface Inventory {
  licensed_bands: LicensedBand[];
  software_catalog: string[];
  sdr_devices: { id: string; node_id: string; attachment: ResourcePath }[];
  compute_nodes: { id: string; cores: number; ram_gb: number }[];
}

export interface ReservationSpec {
  compute: {
    cpu_cores: number;
    cpu_threads: number;
    ram_gb: number;
    storage_gb: number;
    vm_lifetime_s: number;
    software: string[];
  };
  radio: {
    n_usrps: number;
    channels: Channel[];
    path: ResourcePath;
  };
  network: { requested_bps: number };
}

export interface Reservation {
  id: string;
  user: string;
  state: string;
  window: { start_utc: number; end_utc: number };
  spec: ReservationSpec;
  audit: { t_utc: number; actor: string; to_state: string }[];
}

export interface NodeStatusEvent {
  event_id: number;
  node_id: string;
  state: NodeState;
  t_utc: number;
  owner: string | null;
}

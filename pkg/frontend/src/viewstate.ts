/**
 * Console view state: camera-independent UI state with the one hard
 * invariant that the displayed time cursor never exceeds the last
 * engine-confirmed time (StepDone).
 */

export interface OverlayToggles {
  los: boolean;
  order1: boolean;
  order2: boolean;
  order3: boolean;
  mpcMarkers: boolean;
}

export interface ViewState {
  confirmedTime: number;      // last StepDone time
  timeCursor: number;         // what the UI displays; <= confirmedTime
  playing: boolean;
  stepSize: number;
  selectedLink: { tx: number; rx: number } | null;
  overlays: OverlayToggles;
}

export function initialViewState(): ViewState {
  return {
    confirmedTime: 0,
    timeCursor: 0,
    playing: false,
    stepSize: 0.1,
    selectedLink: null,
    overlays: { los: true, order1: true, order2: true, order3: false, mpcMarkers: true },
  };
}

/** Record a StepDone confirmation; the cursor follows the engine. */
export function confirmTime(state: ViewState, time: number): ViewState {
  return { ...state, confirmedTime: time, timeCursor: time };
}

/** Scrub the cursor; clamped so it never exceeds the confirmed time. */
export function scrubTo(state: ViewState, time: number): ViewState {
  return { ...state, timeCursor: Math.min(Math.max(time, 0), state.confirmedTime) };
}

export function toggleOverlay(state: ViewState, key: keyof OverlayToggles): ViewState {
  return { ...state, overlays: { ...state.overlays, [key]: !state.overlays[key] } };
}

export function selectLink(state: ViewState, tx: number, rx: number): ViewState {
  return { ...state, selectedLink: { tx, rx } };
}

export function setPlaying(state: ViewState, playing: boolean): ViewState {
  return { ...state, playing };
}

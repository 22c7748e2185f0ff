/**
 * Preview request lifecycle: at most one request in flight, monotonic
 * request ids, and stale responses (superseded drafts) discarded.
 *
 * Pure state transitions; the caller owns fetch and AbortController wiring.
 */

import type { DetectorKind, PreviewPayload } from './types.js';

export interface PreviewState {
  cls: string | null;
  imageId: string | null;
  draft: string;
  detector: DetectorKind;
  inFlight: boolean;
  lastRequestId: number;
  payload: PreviewPayload | null;
  error: string | null;
  hint: string | null;
}

export function initialState(): PreviewState {
  return {
    cls: null,
    imageId: null,
    draft: '',
    detector: 'zs',
    inFlight: false,
    lastRequestId: 0,
    payload: null,
    error: null,
    hint: null,
  };
}

export type SubmitResult =
  | { kind: 'blocked'; state: PreviewState }
  | { kind: 'request'; state: PreviewState; requestId: number };

/** Validate the draft and, if possible, open request slot n+1 (superseding n). */
export function submitPreview(state: PreviewState): SubmitResult {
  if (!state.cls || !state.imageId) {
    return {
      kind: 'blocked',
      state: { ...state, hint: 'Pick a class and an image first.' },
    };
  }
  if (state.draft.trim() === '') {
    return {
      kind: 'blocked',
      state: { ...state, hint: 'Describe the normality to add, e.g. "thread".' },
    };
  }
  const requestId = state.lastRequestId + 1;
  return {
    kind: 'request',
    requestId,
    state: { ...state, lastRequestId: requestId, inFlight: true, hint: null, error: null },
  };
}

/** Apply a response only if it answers the latest request. */
export function resolvePreview(
  state: PreviewState,
  requestId: number,
  payload: PreviewPayload,
): PreviewState {
  if (requestId !== state.lastRequestId) {
    return state; // stale response for a superseded draft
  }
  return { ...state, inFlight: false, payload, error: null };
}

/** Errors for superseded requests are dropped the same way responses are. */
export function failPreview(
  state: PreviewState,
  requestId: number,
  message: string,
): PreviewState {
  if (requestId !== state.lastRequestId) {
    return state;
  }
  return { ...state, inFlight: false, error: message };
}

export function setDraft(state: PreviewState, draft: string): PreviewState {
  return { ...state, draft, hint: null };
}

export function selectImage(state: PreviewState, cls: string, imageId: string): PreviewState {
  return { ...state, cls, imageId, payload: null, error: null, hint: null };
}

export function setDetector(state: PreviewState, detector: DetectorKind): PreviewState {
  return { ...state, detector };
}

/** Payload shapes of the backing service API. */

export interface MapPayload {
  png_base64: string;
  min: number;
  max: number;
  height: number;
  width: number;
}

export interface PreviewPayload {
  image: string;
  normality_text: string;
  detector: string;
  score_before: number;
  score_after: number;
  map_before: MapPayload;
  map_sup: MapPayload;
  map_after: MapPayload;
}

export interface ScorePair {
  image: string;
  label: number;
  score_before: number;
  score_after: number;
}

export interface EvalReportPayload {
  class: string;
  group: string;
  auroc_before: number;
  auroc_after: number;
  delta: number;
  cell: string;
  pairs: ScorePair[];
}

export interface ImageEntry {
  id: string;
  anomaly_type: string;
}

export type DetectorKind = 'zs' | 'bank' | 'external';

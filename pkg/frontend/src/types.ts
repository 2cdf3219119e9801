/** Shapes exchanged with the annotation service API. */

export interface RoundProgress {
  annotated: number;
  total: number;
}

export interface RoundView {
  round_id: string;
  status: 'annotating' | 'exported' | 'selected';
  progress: RoundProgress;
  categories: Record<string, { pool: string[]; chosen: string[] }>;
}

export interface AnnotationRecord {
  round_id: string;
  pair_id: string;
  text: string;
  annotator: string;
  submitted_at: string;
  seq: number;
}

export interface PairState {
  pair_id: string;
  ref: string | null;
  tgt: string | null;
  score: number | null;
  category: string | null;
  status: 'pending' | 'annotated';
  annotation: AnnotationRecord | null;
}

export interface ApiError {
  error: { code: string; message: string };
}

/** View model for one card on the dashboard. */
export interface PairCard {
  pairId: string;
  refUrl: string;
  tgtUrl: string;
  score: number | null;
  category: string | null;
  annotationText: string | null;
  status: 'pending' | 'annotated';
}

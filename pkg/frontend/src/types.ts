/** Payload shapes of the triage service API. */

export interface SeriesSummary {
  id: string;
  n: number;
  change_score: number | null;
  pivot_month: number | null;
  labeled: boolean;
}

export interface SeriesListResponse {
  items: SeriesSummary[];
  total: number;
}

export interface ScorePoint {
  query_index: number;
  timestamp_month: number;
  score: number;
}

export interface LabelRecord {
  target_id: string;
  label: 0 | 1;
  annotator: string;
  timestamp: string;
  source: string;
}

export interface SeriesDetail {
  id: string;
  n: number;
  timestamps: number[];
  image_format: string;
  change_score: number | null;
  measure: string | null;
  pivot_index: number | null;
  pivot_month: number | null;
  scores: ScorePoint[];
  labeled: boolean;
  labels: LabelRecord[];
}

export type ImagesPerView = 1 | 3 | 5;

export const IMAGES_PER_VIEW: readonly ImagesPerView[] = [1, 3, 5];

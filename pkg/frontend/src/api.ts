/** Typed client for the triage service; the label POST is the only write path. */

import type { LabelRecord, SeriesDetail, SeriesListResponse } from './types.js';

export interface TriageApi {
  listSeries(offset?: number, limit?: number): Promise<SeriesListResponse>;
  getSeries(id: string): Promise<SeriesDetail>;
  imageUrl(id: string, index: number): string;
  postLabel(id: string, label: 0 | 1, annotator: string): Promise<LabelRecord>;
  exportLabels(): Promise<LabelRecord[]>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function expectJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { error?: string };
      if (body.error) detail = body.error;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export function createApi(baseUrl = '', fetchFn: typeof fetch = fetch): TriageApi {
  return {
    async listSeries(offset = 0, limit = 200): Promise<SeriesListResponse> {
      const response = await fetchFn(
        `${baseUrl}/api/series?sort=score&order=desc&offset=${offset}&limit=${limit}`,
      );
      return expectJson<SeriesListResponse>(response);
    },

    async getSeries(id: string): Promise<SeriesDetail> {
      const response = await fetchFn(`${baseUrl}/api/series/${encodeURIComponent(id)}`);
      return expectJson<SeriesDetail>(response);
    },

    imageUrl(id: string, index: number): string {
      return `${baseUrl}/api/series/${encodeURIComponent(id)}/image/${index}`;
    },

    async postLabel(id: string, label: 0 | 1, annotator: string): Promise<LabelRecord> {
      const response = await fetchFn(
        `${baseUrl}/api/series/${encodeURIComponent(id)}/label`,
        {
          method: 'POST',
          headers: { 'content-type': 'application/json' },
          body: JSON.stringify({ label, annotator }),
        },
      );
      return expectJson<LabelRecord>(response);
    },

    async exportLabels(): Promise<LabelRecord[]> {
      const response = await fetchFn(`${baseUrl}/api/labels/export`);
      if (!response.ok) throw new ApiError(response.status, response.statusText);
      const text = await response.text();
      return text
        .split('\n')
        .filter((line) => line.trim().length > 0)
        .map((line) => JSON.parse(line) as LabelRecord);
    },
  };
}

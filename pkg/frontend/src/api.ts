/** Thin typed client for the service API; nothing here computes scores. */

import type { EvalReportPayload, ImageEntry, PreviewPayload } from './types.js';

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number,
  ) {
    super(message);
  }
}

async function parseError(res: Response): Promise<ApiError> {
  let detail = `${res.status} ${res.statusText}`;
  try {
    const body = (await res.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(detail, res.status);
}

export class ApiClient {
  constructor(private readonly baseUrl: string = '') {}

  private async getJson<T>(path: string): Promise<T> {
    const res = await fetch(this.baseUrl + path);
    if (!res.ok) throw await parseError(res);
    return (await res.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown, signal?: AbortSignal): Promise<T> {
    const res = await fetch(this.baseUrl + path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
      signal,
    });
    if (!res.ok) throw await parseError(res);
    return (await res.json()) as T;
  }

  async classes(): Promise<string[]> {
    const data = await this.getJson<{ classes: string[] }>('/api/classes');
    return data.classes;
  }

  async groups(cls: string): Promise<Record<string, string[]>> {
    const data = await this.getJson<{ groups: Record<string, string[]> }>(
      `/api/classes/${encodeURIComponent(cls)}/groups`,
    );
    return data.groups;
  }

  async images(cls: string): Promise<ImageEntry[]> {
    const data = await this.getJson<{ images: ImageEntry[] }>(
      `/api/classes/${encodeURIComponent(cls)}/images?split=test`,
    );
    return data.images;
  }

  imageUrl(imageId: string): string {
    return `${this.baseUrl}/api/images/${imageId}`;
  }

  async preview(
    cls: string,
    imageId: string,
    normalityText: string,
    detector: string,
    signal?: AbortSignal,
  ): Promise<PreviewPayload> {
    return this.postJson<PreviewPayload>(
      '/api/preview',
      { class: cls, image_id: imageId, normality_text: normalityText, detector },
      signal,
    );
  }

  async evaluate(cls: string, group: string, detector: string): Promise<EvalReportPayload> {
    return this.postJson<EvalReportPayload>('/api/evaluate', {
      class: cls,
      group,
      detector,
    });
  }
}

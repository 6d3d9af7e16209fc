/**
 * Typed client for the citypulse read-only JSON API.
 *
 * Every view renders fields from these payloads verbatim; no numbers are
 * computed client-side. The client only knows the documented /api/... routes
 * and the shared error envelope {"error": {"code", "message"}}.
 */

export interface CityMeta {
  city_id: string;
  config: Record<string, unknown>;
  period: [string, string];
  n_windows: number;
  grid: {
    n_rows: number;
    n_cols: number;
    cell_size_m: number;
    origin: [number, number];
    lat_max: number;
    lon_max: number;
  };
  types: string[];
  resolutions: string[];
  week_ids: string[];
  n_antennas: number;
  n_regions: { cells: number; districts: number; city: number };
}

export interface CellRegion {
  region_id: string;
  kind: 'cell';
  row: number;
  col: number;
  /** [lat_min, lon_min, lat_max, lon_max] */
  bounds: [number, number, number, number];
  center: [number, number];
  n_antennas: number;
}

export interface DistrictRegion {
  region_id: string;
  kind: 'district';
  name: string;
  /** Outer ring first, then holes; vertices as [lat, lon]. */
  rings: [number, number][][];
  n_antennas: number;
}

export interface CityRegion {
  region_id: string;
  kind: 'city';
  n_antennas: number;
}

export type Region = CellRegion | DistrictRegion | CityRegion;

export interface SeriesPayload {
  region_id: string;
  type: string;
  resolution: string;
  period: [string, string];
  step_seconds: number | null;
  /** Bucket labels for day/week resolutions; null for 15min/hour. */
  keys: string[] | null;
  values: (number | null)[];
}

export interface TypicalWeekPayload {
  region_id: string;
  activity: string;
  normalized: boolean;
  /** 672 bins: Monday 00:00 to Sunday 23:45 local time. */
  values: (number | null)[];
  support: number[];
}

export interface ResidualsPayload {
  region_id: string;
  type: string;
  /** Per-window z-scores over the full period. */
  values: (number | null)[];
  sigma: (number | null)[];
}

export interface EventRecord {
  region_id: string;
  activity: string;
  start_window: string;
  end_window: string;
  peak_window: string;
  peak_z: number;
  mean_z: number;
  duration_windows: number;
}

export interface ClustersPayload {
  k: number;
  seed: number;
  types: string[];
  sse: number;
  labels: Record<string, string>;
  centroids: number[][];
  assignment: Record<string, number>;
}

export interface ComparePayload {
  city: string;
  other_city: string;
  k: number;
  types: string[];
  labels: Record<string, string>;
  other_labels: Record<string, string>;
  distances: number[][];
  pairs: { a: number; b: number; distance: number }[];
}

export interface DensityPayload {
  metric: 'volume' | 'ratio';
  type: string;
  period: [string, string];
  n_rows: number;
  n_cols: number;
  /** Row-major n_rows*n_cols; null marks cells with no antennas. */
  values: (number | null)[];
  coverage: number[];
  versus?: string | null;
}

/** Structured failure from the API error envelope (or transport). */
export class ApiError extends Error {
  code: string;
  status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.code = code;
    this.status = status;
  }
}

export type FetchLike = (url: string) => Promise<Response>;

function query(params: Record<string, string | number | boolean | null | undefined>): string {
  const q = new URLSearchParams();
  for (const [key, value] of Object.entries(params)) {
    if (value === null || value === undefined) continue;
    q.set(key, String(value));
  }
  const s = q.toString();
  return s ? `?${s}` : '';
}

export class Api {
  private base: string;
  private fetchFn: FetchLike;

  constructor(base = '', fetchFn: FetchLike = (url) => fetch(url)) {
    this.base = base.replace(/\/$/, '');
    this.fetchFn = fetchFn;
  }

  private async get(path: string): Promise<Response> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.base + path);
    } catch (err) {
      throw new ApiError('network_error', String(err), 0);
    }
    if (!resp.ok) {
      let code = 'error';
      let message = `HTTP ${resp.status}`;
      try {
        const body = await resp.json();
        if (body && body.error) {
          code = body.error.code ?? code;
          message = body.error.message ?? message;
        }
      } catch {
        // non-JSON error body; keep the transport message
      }
      throw new ApiError(code, message, resp.status);
    }
    return resp;
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.get(path);
    return (await resp.json()) as T;
  }

  cities(): Promise<string[]> {
    return this.getJson('/api/cities');
  }

  meta(city: string): Promise<CityMeta> {
    return this.getJson(`/api/cities/${encodeURIComponent(city)}/meta`);
  }

  regions(city: string): Promise<{ regions: Region[] }> {
    return this.getJson(`/api/cities/${encodeURIComponent(city)}/regions`);
  }

  series(city: string, region: string, type: string, res: string): Promise<SeriesPayload> {
    const path = `/api/cities/${encodeURIComponent(city)}/regions/${encodeURIComponent(region)}/series`;
    return this.getJson(path + query({ type, res }));
  }

  typicalWeek(
    city: string,
    region: string,
    type: string,
    normalized: boolean,
  ): Promise<TypicalWeekPayload> {
    const path = `/api/cities/${encodeURIComponent(city)}/regions/${encodeURIComponent(region)}/typicalweek`;
    return this.getJson(path + query({ type, normalized }));
  }

  residuals(city: string, region: string, type: string): Promise<ResidualsPayload> {
    const path = `/api/cities/${encodeURIComponent(city)}/regions/${encodeURIComponent(region)}/residuals`;
    return this.getJson(path + query({ type }));
  }

  /** Detected events as parsed ndjson lines; an empty body means no events. */
  async events(city: string, region: string, type: string): Promise<EventRecord[]> {
    const path = `/api/cities/${encodeURIComponent(city)}/regions/${encodeURIComponent(region)}/events`;
    const resp = await this.get(path + query({ type }));
    const text = await resp.text();
    const out: EventRecord[] = [];
    for (const line of text.split('\n')) {
      if (line.trim() === '') continue;
      out.push(JSON.parse(line) as EventRecord);
    }
    return out;
  }

  clusters(city: string, k: number): Promise<ClustersPayload> {
    const path = `/api/cities/${encodeURIComponent(city)}/clusters`;
    return this.getJson(path + query({ k }));
  }

  compare(city: string, k: number, otherCity: string): Promise<ComparePayload> {
    const path = `/api/cities/${encodeURIComponent(city)}/clusters/${k}/compare`;
    return this.getJson(path + query({ other_city: otherCity }));
  }

  density(
    city: string,
    metric: 'volume' | 'ratio',
    type: string,
    versus: string | null,
    from: string | null,
    to: string | null,
  ): Promise<DensityPayload> {
    const path = `/api/cities/${encodeURIComponent(city)}/density`;
    return this.getJson(path + query({ metric, type, versus, from, to }));
  }
}

/** Everything a view needs from the app shell. */

import { Api, ApiError, CellRegion, CityMeta, DistrictRegion } from './api';
import { BannerArea } from './banners';
import { ViewState } from './state';

export interface ViewContext {
  api: Api;
  state: ViewState;
  meta: CityMeta;
  cells: CellRegion[];
  districts: DistrictRegion[];
  cities: string[];
  banners: BannerArea;
  basemapUrl: string | null;
  /** Merge a patch into the state, push the URL, re-render. */
  update(patch: Partial<ViewState>): void;
  /** False once a newer render has started; stale fetches must bail. */
  generationOk(): boolean;
  /** Surface an API failure as a dismissible banner. */
  reportError(err: unknown): void;
}

export function describeError(err: unknown): { code: string; message: string } {
  if (err instanceof ApiError) return { code: err.code, message: err.message };
  return { code: 'error', message: String(err) };
}

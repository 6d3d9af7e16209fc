/**
 * Shareable view state. The whole UI renders from one ViewState, and
 * ViewState -> URL -> ViewState is the identity, so copying the address bar
 * reproduces the exact view.
 */

export type Mode = 'timeseries' | 'clusters' | 'density';

/** Sub-view of timeseries mode. */
export type Panel = 'series' | 'typicalweek' | 'residuals';

export type Metric = 'volume' | 'ratio';

export interface ViewState {
  mode: Mode;
  city: string;
  /** Ordered selection, at most MAX_REGIONS entries. */
  regions: string[];
  panel: Panel;
  type: string;
  res: string;
  normalized: boolean;
  k: number;
  /** Second city for the cluster compare panel; null hides it. */
  compare: string | null;
  metric: Metric;
  /** Denominator type for metric=ratio; null lets the server reject it. */
  versus: string | null;
  /** Density period override (UTC ISO); null means the full stored period. */
  from: string | null;
  to: string | null;
}

export const MAX_REGIONS = 4;

const MODES: Mode[] = ['timeseries', 'clusters', 'density'];
const PANELS: Panel[] = ['series', 'typicalweek', 'residuals'];

export function defaultState(): ViewState {
  return {
    mode: 'timeseries',
    city: '',
    regions: [],
    panel: 'series',
    type: 'CALLS',
    res: 'day',
    normalized: true,
    k: 5,
    compare: null,
    metric: 'volume',
    versus: null,
    from: null,
    to: null,
  };
}

/** Serialize to a query string ("?mode=..."); empty string for all-defaults. */
export function encodeState(state: ViewState): string {
  const d = defaultState();
  const q = new URLSearchParams();
  if (state.mode !== d.mode) q.set('mode', state.mode);
  if (state.city !== d.city) q.set('city', state.city);
  for (const region of state.regions) q.append('region', region);
  if (state.panel !== d.panel) q.set('panel', state.panel);
  if (state.type !== d.type) q.set('type', state.type);
  if (state.res !== d.res) q.set('res', state.res);
  if (state.normalized !== d.normalized) q.set('normalized', state.normalized ? '1' : '0');
  if (state.k !== d.k) q.set('k', String(state.k));
  if (state.compare !== null) q.set('compare', state.compare);
  if (state.metric !== d.metric) q.set('metric', state.metric);
  if (state.versus !== null) q.set('versus', state.versus);
  if (state.from !== null) q.set('from', state.from);
  if (state.to !== null) q.set('to', state.to);
  const s = q.toString();
  return s ? `?${s}` : '';
}

/** Parse a query string (with or without leading "?") back into a ViewState. */
export function decodeState(search: string): ViewState {
  const q = new URLSearchParams(search.startsWith('?') ? search.slice(1) : search);
  const state = defaultState();
  const mode = q.get('mode');
  if (mode && (MODES as string[]).includes(mode)) state.mode = mode as Mode;
  const city = q.get('city');
  if (city !== null) state.city = city;
  state.regions = q.getAll('region').slice(0, MAX_REGIONS);
  const panel = q.get('panel');
  if (panel && (PANELS as string[]).includes(panel)) state.panel = panel as Panel;
  const type = q.get('type');
  if (type !== null) state.type = type;
  const res = q.get('res');
  if (res !== null) state.res = res;
  const normalized = q.get('normalized');
  if (normalized !== null) state.normalized = normalized === '1';
  const k = q.get('k');
  if (k !== null && /^\d+$/.test(k)) state.k = parseInt(k, 10);
  state.compare = q.get('compare');
  const metric = q.get('metric');
  if (metric === 'volume' || metric === 'ratio') state.metric = metric;
  state.versus = q.get('versus');
  state.from = q.get('from');
  state.to = q.get('to');
  return state;
}

/** Toggle a region in the ordered selection; oldest is dropped past the cap. */
export function toggleRegion(state: ViewState, regionId: string): string[] {
  const current = state.regions.slice();
  const at = current.indexOf(regionId);
  if (at >= 0) {
    current.splice(at, 1);
    return current;
  }
  current.push(regionId);
  while (current.length > MAX_REGIONS) current.shift();
  return current;
}

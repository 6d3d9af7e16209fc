/**
 * Display-only color mapping. Quantile breaks are nearest-rank order
 * statistics, i.e. actual elements of the input list, so legend labels never
 * show a number that is not in the payload.
 */

export const SERIES_COLORS = ['#1f6fb2', '#d95f02', '#1b9e77', '#7570b3'];

export const CLUSTER_COLORS = [
  '#1f6fb2',
  '#d95f02',
  '#1b9e77',
  '#7570b3',
  '#e7298a',
  '#66a61e',
  '#e6ab02',
  '#a6761d',
];

/** Sequential ramp for heatmaps, light to dark. */
export const HEAT_COLORS = ['#fee8c8', '#fdbb84', '#fc8d59', '#e34a33', '#b30000'];

export function seriesColor(i: number): string {
  return SERIES_COLORS[i % SERIES_COLORS.length];
}

export function clusterColor(i: number): string {
  return CLUSTER_COLORS[i % CLUSTER_COLORS.length];
}

export interface QuantileScale {
  /** Color for a covered value; absent (null) cells are not colored at all. */
  color(value: number): string;
  /** Upper break of each color band; elements of the input values. */
  breaks: number[];
  /** Smallest and largest covered values (also input elements). */
  min: number;
  max: number;
  /** True when every covered value is identical (single-color map). */
  degenerate: boolean;
}

export function quantileScale(covered: number[], colors: string[] = HEAT_COLORS): QuantileScale {
  if (covered.length === 0) {
    return { color: () => colors[0], breaks: [], min: NaN, max: NaN, degenerate: true };
  }
  const sorted = covered.slice().sort((a, b) => a - b);
  const min = sorted[0];
  const max = sorted[sorted.length - 1];
  if (min === max) {
    return { color: () => colors[0], breaks: [max], min, max, degenerate: true };
  }
  // nearest-rank: break i is the ceil((i+1)/n * len)-th smallest value
  const n = colors.length;
  const breaks: number[] = [];
  for (let i = 0; i < n; i++) {
    const rank = Math.ceil(((i + 1) / n) * sorted.length);
    breaks.push(sorted[Math.min(rank, sorted.length) - 1]);
  }
  const color = (value: number): string => {
    for (let i = 0; i < n - 1; i++) {
      if (value <= breaks[i]) return colors[i];
    }
    return colors[n - 1];
  };
  return { color, breaks, min, max, degenerate: false };
}

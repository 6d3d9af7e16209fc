/**
 * Minimal dependency-free SVG line charts.
 *
 * Values are plotted and echoed verbatim: the tooltip and the axis extremes
 * print String(value) of payload numbers, never a reformatted or computed
 * figure. Null values break the line into gaps.
 */

const SVG_NS = 'http://www.w3.org/2000/svg';

export interface ChartSeries {
  label: string;
  color: string;
  values: (number | null)[];
}

/** Closed index range shaded behind the lines, e.g. a detected event. */
export interface ChartSpan {
  start: number;
  end: number;
  title: string;
}

export interface ChartOptions {
  series: ChartSeries[];
  spans?: ChartSpan[];
  /** Text anchored under the left/right ends of the x axis. */
  xLabels?: { start: string; end: string };
  /** Hover caption for index i (bucket key, timestamp, bin name, ...). */
  xKey?: (i: number) => string;
  /** Draw vertical separators every binsPerDay bins with these captions. */
  dayGrid?: { binsPerDay: number; labels: string[] };
  width?: number;
  height?: number;
  /** Horizontal rule at this y value (e.g. a detection threshold). */
  baseline?: number;
}

export interface ChartHandle {
  svg: SVGSVGElement;
  /** Show the tooltip for sample index i; the mousemove handler routes here. */
  hover(i: number): void;
  clear(): void;
}

const PAD_X = 44;
const PAD_Y = 18;

function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number>,
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, String(v));
  return el;
}

export function lineChart(container: HTMLElement, options: ChartOptions): ChartHandle {
  const width = options.width ?? 860;
  const height = options.height ?? 260;
  const series = options.series;
  const nPoints = Math.max(1, ...series.map((s) => s.values.length));

  let min = Infinity;
  let max = -Infinity;
  for (const s of series) {
    for (const v of s.values) {
      if (v === null) continue;
      if (v < min) min = v;
      if (v > max) max = v;
    }
  }
  if (options.baseline !== undefined) {
    min = Math.min(min, options.baseline);
    max = Math.max(max, options.baseline);
  }
  const empty = !isFinite(min);
  if (empty) {
    min = 0;
    max = 1;
  }
  const spanY = max - min || 1;

  const plotW = width - 2 * PAD_X;
  const plotH = height - 2 * PAD_Y;
  const xAt = (i: number) => PAD_X + (nPoints > 1 ? (i / (nPoints - 1)) * plotW : plotW / 2);
  const yAt = (v: number) => PAD_Y + (1 - (v - min) / spanY) * plotH;

  const svg = svgEl('svg', {
    viewBox: `0 0 ${width} ${height}`,
    class: 'chart',
    role: 'img',
  });
  svg.setAttribute('preserveAspectRatio', 'none');
  svg.tabIndex = 0;

  for (const span of options.spans ?? []) {
    const x0 = xAt(Math.max(0, span.start));
    const x1 = xAt(Math.min(nPoints - 1, span.end));
    const rect = svgEl('rect', {
      x: x0,
      y: PAD_Y,
      width: Math.max(x1 - x0, 2),
      height: plotH,
      class: 'event-span',
      'data-start': span.start,
      'data-end': span.end,
    });
    const title = document.createElementNS(SVG_NS, 'title');
    title.textContent = span.title;
    rect.appendChild(title);
    svg.appendChild(rect);
  }

  if (options.dayGrid) {
    const { binsPerDay, labels } = options.dayGrid;
    for (let d = 0; d * binsPerDay < nPoints; d++) {
      const x = xAt(d * binsPerDay);
      if (d > 0) {
        svg.appendChild(
          svgEl('line', { x1: x, y1: PAD_Y, x2: x, y2: PAD_Y + plotH, class: 'grid-line' }),
        );
      }
      const label = labels[d % labels.length];
      const text = svgEl('text', { x: x + 4, y: height - 4, class: 'axis-label' });
      text.textContent = label;
      svg.appendChild(text);
    }
  }

  if (options.baseline !== undefined && !empty) {
    const y = yAt(options.baseline);
    svg.appendChild(
      svgEl('line', { x1: PAD_X, y1: y, x2: PAD_X + plotW, y2: y, class: 'baseline' }),
    );
  }

  for (const s of series) {
    let d = '';
    let pen = false;
    s.values.forEach((v, i) => {
      if (v === null) {
        pen = false;
        return;
      }
      d += `${pen ? 'L' : 'M'}${xAt(i).toFixed(2)},${yAt(v).toFixed(2)}`;
      pen = true;
    });
    if (d === '') continue;
    svg.appendChild(
      svgEl('path', { d, fill: 'none', stroke: s.color, 'stroke-width': 1.4, class: 'series' }),
    );
  }

  if (!empty) {
    const lo = svgEl('text', { x: PAD_X - 6, y: yAt(min), class: 'axis-label y-min' });
    lo.textContent = String(min);
    lo.setAttribute('text-anchor', 'end');
    const hi = svgEl('text', { x: PAD_X - 6, y: yAt(max) + 10, class: 'axis-label y-max' });
    hi.textContent = String(max);
    hi.setAttribute('text-anchor', 'end');
    svg.appendChild(lo);
    svg.appendChild(hi);
  }

  if (options.xLabels) {
    const start = svgEl('text', { x: PAD_X, y: height - 4, class: 'axis-label x-start' });
    start.textContent = options.xLabels.start;
    const end = svgEl('text', { x: PAD_X + plotW, y: height - 4, class: 'axis-label x-end' });
    end.textContent = options.xLabels.end;
    end.setAttribute('text-anchor', 'end');
    svg.appendChild(start);
    svg.appendChild(end);
  }

  const cursor = svgEl('line', {
    x1: 0,
    y1: PAD_Y,
    x2: 0,
    y2: PAD_Y + plotH,
    class: 'cursor',
    visibility: 'hidden',
  });
  svg.appendChild(cursor);

  const tooltip = document.createElement('div');
  tooltip.className = 'chart-tooltip';
  tooltip.hidden = true;

  let cursorIndex = -1;

  const hover = (i: number): void => {
    if (i < 0 || i >= nPoints) return;
    cursorIndex = i;
    cursor.setAttribute('x1', String(xAt(i)));
    cursor.setAttribute('x2', String(xAt(i)));
    cursor.setAttribute('visibility', 'visible');
    tooltip.hidden = false;
    tooltip.replaceChildren();
    if (options.xKey) {
      const head = document.createElement('div');
      head.className = 'tooltip-key';
      head.textContent = options.xKey(i);
      tooltip.appendChild(head);
    }
    for (const s of series) {
      const v = i < s.values.length ? s.values[i] : null;
      const row = document.createElement('div');
      row.className = 'tooltip-row';
      row.style.color = s.color;
      row.textContent = `${s.label}: ${v === null ? 'no data' : String(v)}`;
      tooltip.appendChild(row);
    }
  };

  const clear = (): void => {
    cursor.setAttribute('visibility', 'hidden');
    tooltip.hidden = true;
  };

  svg.addEventListener('mousemove', (ev: MouseEvent) => {
    const rect = svg.getBoundingClientRect();
    if (rect.width === 0) return;
    const frac = ((ev.clientX - rect.left) / rect.width) * width;
    const i = Math.round(((frac - PAD_X) / plotW) * (nPoints - 1));
    hover(Math.max(0, Math.min(nPoints - 1, i)));
  });
  svg.addEventListener('mouseleave', clear);
  // keyboard cursor: arrows step through samples, Home/End jump
  svg.addEventListener('keydown', (ev: KeyboardEvent) => {
    if (ev.key === 'ArrowRight') hover(Math.min(nPoints - 1, cursorIndex + 1));
    else if (ev.key === 'ArrowLeft') hover(Math.max(0, cursorIndex - 1));
    else if (ev.key === 'Home') hover(0);
    else if (ev.key === 'End') hover(nPoints - 1);
    else if (ev.key === 'Escape') clear();
    else return;
    ev.preventDefault();
  });

  container.replaceChildren(svg, tooltip);
  return { svg, hover, clear };
}

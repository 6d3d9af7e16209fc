/**
 * Density mode: grid heatmap of a stored density map. Colors come from a
 * quantile scale over covered cells; cells with no antennas stay uncolored.
 * The tooltip and legend echo payload values exactly.
 */

import { DensityPayload } from '../api';
import { GridMap } from '../mapview';
import { quantileScale, HEAT_COLORS, QuantileScale } from '../scale';
import { Metric } from '../state';
import { ViewContext } from '../context';

export function cellValue(payload: DensityPayload, row: number, col: number): number | null {
  return payload.values[row * payload.n_cols + col];
}

export class DensityView {
  async render(container: HTMLElement, ctx: ViewContext): Promise<void> {
    const { state, api } = ctx;
    container.replaceChildren();

    const layout = document.createElement('div');
    layout.className = 'view-layout';
    const mapBox = document.createElement('div');
    mapBox.className = 'map-box';
    const sideBox = document.createElement('div');
    sideBox.className = 'chart-box';
    layout.appendChild(mapBox);
    layout.appendChild(sideBox);
    container.appendChild(layout);

    sideBox.appendChild(this.controls(ctx));

    let payload: DensityPayload;
    try {
      payload = await api.density(
        state.city,
        state.metric,
        state.type,
        state.metric === 'ratio' ? state.versus : null,
        state.from,
        state.to,
      );
    } catch (err) {
      if (!ctx.generationOk()) return;
      ctx.reportError(err);
      const note = document.createElement('p');
      note.className = 'hint';
      note.textContent = 'No density map for this selection.';
      sideBox.appendChild(note);
      return;
    }
    if (!ctx.generationOk()) return;

    const covered: number[] = [];
    for (const v of payload.values) if (v !== null) covered.push(v);
    const scale = quantileScale(covered);

    const byRegion = new Map<string, { value: number | null; coverage: number }>();
    for (const cell of ctx.cells) {
      const idx = cell.row * payload.n_cols + cell.col;
      byRegion.set(cell.region_id, {
        value: cellValue(payload, cell.row, cell.col),
        coverage: payload.coverage[idx],
      });
    }

    const tooltip = document.createElement('div');
    tooltip.className = 'density-tooltip';
    tooltip.hidden = true;

    const map = new GridMap(mapBox, {
      basemapUrl: ctx.basemapUrl,
      onCellEnter: (regionId) => {
        const entry = byRegion.get(regionId);
        tooltip.hidden = false;
        tooltip.replaceChildren();
        const name = document.createElement('div');
        name.className = 'tooltip-key';
        name.textContent = regionId;
        tooltip.appendChild(name);
        const value = document.createElement('div');
        value.className = 'tooltip-value';
        value.textContent =
          entry === undefined || entry.value === null ? 'no data' : String(entry.value);
        tooltip.appendChild(value);
        if (entry !== undefined && entry.value !== null) {
          const cov = document.createElement('div');
          cov.className = 'tooltip-coverage';
          cov.textContent = `coverage: ${String(entry.coverage)} windows`;
          tooltip.appendChild(cov);
        }
      },
      onCellLeave: () => {
        tooltip.hidden = true;
      },
    });
    map.setRegions(ctx.cells, []);
    map.setCellStyle((regionId) => {
      const entry = byRegion.get(regionId);
      if (entry === undefined || entry.value === null) return { fill: null };
      return { fill: scale.color(entry.value), fillOpacity: 0.8 };
    });
    mapBox.appendChild(tooltip);

    sideBox.appendChild(this.legend(payload, scale, state.metric));
    sideBox.appendChild(this.coverageNote(payload, ctx));
  }

  private controls(ctx: ViewContext): HTMLElement {
    const { state } = ctx;
    const controls = document.createElement('div');
    controls.className = 'panel-controls density-controls';

    const metric = document.createElement('select');
    metric.className = 'metric-select';
    for (const m of ['volume', 'ratio'] as Metric[]) {
      const opt = document.createElement('option');
      opt.value = m;
      opt.textContent = m;
      opt.selected = m === state.metric;
      metric.appendChild(opt);
    }
    metric.addEventListener('change', () => {
      const m = metric.value as Metric;
      if (m === 'ratio' && state.versus === null) {
        // ratio needs a denominator; pick the first other type
        const other = ctx.meta.types.find((t) => t !== state.type) ?? null;
        ctx.update({ metric: m, versus: other });
      } else {
        ctx.update({ metric: m });
      }
    });
    controls.appendChild(metric);

    if (state.metric === 'ratio') {
      const versus = document.createElement('select');
      versus.className = 'versus-select';
      for (const t of ctx.meta.types) {
        if (t === state.type) continue;
        const opt = document.createElement('option');
        opt.value = t;
        opt.textContent = `vs ${t}`;
        opt.selected = t === state.versus;
        versus.appendChild(opt);
      }
      versus.addEventListener('change', () => ctx.update({ versus: versus.value }));
      controls.appendChild(versus);
    }

    const from = document.createElement('input');
    from.type = 'text';
    from.className = 'from-input';
    from.placeholder = 'from (UTC ISO)';
    from.value = state.from ?? '';
    const to = document.createElement('input');
    to.type = 'text';
    to.className = 'to-input';
    to.placeholder = 'to (UTC ISO)';
    to.value = state.to ?? '';
    const apply = document.createElement('button');
    apply.textContent = 'apply period';
    apply.addEventListener('click', () => {
      ctx.update({
        from: from.value.trim() === '' ? null : from.value.trim(),
        to: to.value.trim() === '' ? null : to.value.trim(),
      });
    });
    controls.appendChild(from);
    controls.appendChild(to);
    controls.appendChild(apply);
    return controls;
  }

  private legend(payload: DensityPayload, scale: QuantileScale, metric: Metric): HTMLElement {
    const legend = document.createElement('div');
    legend.className = 'density-legend';
    const title = document.createElement('div');
    title.className = 'legend-title';
    title.textContent =
      metric === 'ratio' ? `${payload.type} / ${payload.versus ?? ''}` : `${payload.type} volume`;
    legend.appendChild(title);

    const ramp = document.createElement('div');
    ramp.className = 'legend-ramp';
    if (scale.degenerate) {
      const cell = document.createElement('span');
      cell.className = 'ramp-cell';
      cell.style.background = HEAT_COLORS[0];
      cell.textContent = isNaN(scale.max) ? 'no data' : String(scale.max);
      ramp.appendChild(cell);
    } else if (metric === 'ratio') {
      // ratios live in [0, 1]; label the bounds, color by quantile
      for (const [label, color] of [
        ['0', HEAT_COLORS[0]],
        ['1', HEAT_COLORS[HEAT_COLORS.length - 1]],
      ] as const) {
        const cell = document.createElement('span');
        cell.className = 'ramp-cell';
        cell.style.background = color;
        cell.textContent = label;
        ramp.appendChild(cell);
      }
    } else {
      scale.breaks.forEach((b, i) => {
        const cell = document.createElement('span');
        cell.className = 'ramp-cell';
        cell.style.background = HEAT_COLORS[i % HEAT_COLORS.length];
        cell.textContent = String(b);
        ramp.appendChild(cell);
      });
    }
    legend.appendChild(ramp);
    return legend;
  }

  private coverageNote(payload: DensityPayload, ctx: ViewContext): HTMLElement {
    const note = document.createElement('p');
    note.className = 'coverage-note';
    const requested =
      ctx.state.from || ctx.state.to
        ? ` (requested ${ctx.state.from ?? 'start'} .. ${ctx.state.to ?? 'end'})`
        : '';
    note.textContent = `period ${payload.period[0]} .. ${payload.period[1]}${requested}`;
    return note;
  }
}

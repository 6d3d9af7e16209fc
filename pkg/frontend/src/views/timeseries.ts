/**
 * Timeseries mode: overlay up to four regions as long-term series, typical
 * weeks, or residual z-scores with detected event spans shaded. Regions are
 * picked by clicking grid cells on the map.
 */

import { Api, EventRecord, ResidualsPayload } from '../api';
import { lineChart, ChartSeries, ChartSpan } from '../charts';
import { GridMap } from '../mapview';
import { seriesColor } from '../scale';
import { Panel, toggleRegion } from '../state';
import { ViewContext } from '../context';

export const WEEKDAYS = ['Mon', 'Tue', 'Wed', 'Thu', 'Fri', 'Sat', 'Sun'];
const BINS_PER_DAY = 96;
const WINDOW_MS = 15 * 60 * 1000;

/** Caption for a typical-week bin index, e.g. 451 -> "Thu 16:45". */
export function binName(i: number): string {
  const day = WEEKDAYS[Math.floor(i / BINS_PER_DAY) % 7];
  const slot = i % BINS_PER_DAY;
  const hh = String(Math.floor(slot / 4)).padStart(2, '0');
  const mm = String((slot % 4) * 15).padStart(2, '0');
  return `${day} ${hh}:${mm}`;
}

/** Window index of a UTC ISO timestamp relative to the stored period start. */
export function windowIndex(iso: string, periodStart: string): number {
  return Math.round((Date.parse(iso) - Date.parse(periodStart)) / WINDOW_MS);
}

export function eventSpanTitle(ev: EventRecord): string {
  return (
    `${ev.region_id} ${ev.activity} ${ev.start_window} .. ${ev.end_window}` +
    ` peak_z=${String(ev.peak_z)}`
  );
}

const PANEL_NAMES: { id: Panel; label: string }[] = [
  { id: 'series', label: 'long-term series' },
  { id: 'typicalweek', label: 'typical week' },
  { id: 'residuals', label: 'residuals' },
];

export class TimeseriesView {
  async render(container: HTMLElement, ctx: ViewContext): Promise<void> {
    const { state, api } = ctx;
    container.replaceChildren();

    const layout = document.createElement('div');
    layout.className = 'view-layout';
    const mapBox = document.createElement('div');
    mapBox.className = 'map-box';
    const chartBox = document.createElement('div');
    chartBox.className = 'chart-box';
    layout.appendChild(mapBox);
    layout.appendChild(chartBox);
    container.appendChild(layout);

    const selected = state.regions;
    const map = new GridMap(mapBox, {
      basemapUrl: ctx.basemapUrl,
      onCellClick: (regionId) => ctx.update({ regions: toggleRegion(state, regionId) }),
    });
    map.setRegions(ctx.cells, ctx.districts);
    map.setCellStyle((regionId) => {
      const at = selected.indexOf(regionId);
      if (at < 0) return { fill: null };
      return { fill: seriesColor(at), fillOpacity: 0.35, stroke: seriesColor(at), strokeWidth: 3 };
    });

    chartBox.appendChild(this.panelTabs(ctx));
    chartBox.appendChild(this.panelControls(ctx));

    const chartHost = document.createElement('div');
    chartHost.className = 'chart-host';
    chartBox.appendChild(chartHost);

    if (selected.length === 0) {
      const hint = document.createElement('p');
      hint.className = 'hint';
      hint.textContent = 'Click grid cells on the map to overlay up to 4 regions.';
      chartHost.appendChild(hint);
      return;
    }

    try {
      if (state.panel === 'series') await this.renderSeries(chartHost, ctx);
      else if (state.panel === 'typicalweek') await this.renderTypicalWeek(chartHost, ctx);
      else await this.renderResiduals(chartHost, ctx);
    } catch (err) {
      if (!ctx.generationOk()) return;
      ctx.reportError(err);
      const note = document.createElement('p');
      note.className = 'hint';
      note.textContent = 'No data for this selection.';
      chartHost.replaceChildren(note);
    }
  }

  private panelTabs(ctx: ViewContext): HTMLElement {
    const tabs = document.createElement('div');
    tabs.className = 'panel-tabs';
    for (const { id, label } of PANEL_NAMES) {
      const btn = document.createElement('button');
      btn.textContent = label;
      btn.className = ctx.state.panel === id ? 'tab active' : 'tab';
      btn.setAttribute('data-panel', id);
      btn.addEventListener('click', () => ctx.update({ panel: id }));
      tabs.appendChild(btn);
    }
    return tabs;
  }

  private panelControls(ctx: ViewContext): HTMLElement {
    const { state } = ctx;
    const controls = document.createElement('div');
    controls.className = 'panel-controls';
    if (state.panel === 'series') {
      const res = document.createElement('select');
      res.className = 'res-select';
      for (const r of ctx.meta.resolutions) {
        const opt = document.createElement('option');
        opt.value = r;
        opt.textContent = r;
        opt.selected = r === state.res;
        res.appendChild(opt);
      }
      res.addEventListener('change', () => ctx.update({ res: res.value }));
      controls.appendChild(res);
    }
    if (state.panel === 'typicalweek') {
      const label = document.createElement('label');
      const box = document.createElement('input');
      box.type = 'checkbox';
      box.className = 'normalized-toggle';
      box.checked = state.normalized;
      box.addEventListener('change', () => ctx.update({ normalized: box.checked }));
      label.appendChild(box);
      label.appendChild(document.createTextNode(' normalized'));
      controls.appendChild(label);
    }
    return controls;
  }

  private async renderSeries(host: HTMLElement, ctx: ViewContext): Promise<void> {
    const { state, api } = ctx;
    const payloads = await Promise.all(
      state.regions.map((r) => api.series(state.city, r, state.type, state.res)),
    );
    if (!ctx.generationOk()) return;
    const series: ChartSeries[] = payloads.map((p, i) => ({
      label: p.region_id,
      color: seriesColor(i),
      values: p.values,
    }));
    const first = payloads[0];
    const keys = first.keys;
    lineChart(host, {
      series,
      xLabels: keys
        ? { start: keys[0], end: keys[keys.length - 1] }
        : { start: first.period[0], end: first.period[1] },
      xKey: (i) => (keys ? keys[i] : `bin ${i}`),
    });
  }

  private async renderTypicalWeek(host: HTMLElement, ctx: ViewContext): Promise<void> {
    const { state, api } = ctx;
    const payloads = await Promise.all(
      state.regions.map((r) => api.typicalWeek(state.city, r, state.type, state.normalized)),
    );
    if (!ctx.generationOk()) return;
    const series: ChartSeries[] = payloads.map((p, i) => ({
      label: p.region_id,
      color: seriesColor(i),
      values: p.values,
    }));
    lineChart(host, {
      series,
      dayGrid: { binsPerDay: BINS_PER_DAY, labels: WEEKDAYS },
      xKey: binName,
    });
  }

  private async renderResiduals(host: HTMLElement, ctx: ViewContext): Promise<void> {
    const { state, api } = ctx;
    const loaded = await Promise.all(
      state.regions.map(async (r) => {
        const residuals = await api.residuals(state.city, r, state.type);
        const events = await api.events(state.city, r, state.type);
        return { residuals, events };
      }),
    );
    if (!ctx.generationOk()) return;
    const series: ChartSeries[] = loaded.map((item, i) => ({
      label: item.residuals.region_id,
      color: seriesColor(i),
      values: item.residuals.values,
    }));
    const periodStart = ctx.meta.period[0];
    const spans: ChartSpan[] = [];
    const allEvents: EventRecord[] = [];
    for (const item of loaded) {
      for (const ev of item.events) {
        spans.push({
          start: windowIndex(ev.start_window, periodStart),
          end: windowIndex(ev.end_window, periodStart),
          title: eventSpanTitle(ev),
        });
        allEvents.push(ev);
      }
    }
    lineChart(host, {
      series,
      spans,
      xLabels: { start: ctx.meta.period[0], end: ctx.meta.period[1] },
      xKey: (i) => `window ${i}`,
    });
    host.appendChild(eventTable(allEvents));
  }
}

function eventTable(events: EventRecord[]): HTMLElement {
  const wrap = document.createElement('div');
  wrap.className = 'event-table';
  if (events.length === 0) {
    const p = document.createElement('p');
    p.className = 'hint';
    p.textContent = 'No detected events for this selection.';
    wrap.appendChild(p);
    return wrap;
  }
  const table = document.createElement('table');
  const head = document.createElement('tr');
  for (const h of ['region', 'type', 'start', 'end', 'peak', 'peak z', 'mean z', 'windows']) {
    const th = document.createElement('th');
    th.textContent = h;
    head.appendChild(th);
  }
  table.appendChild(head);
  for (const ev of events) {
    const tr = document.createElement('tr');
    tr.className = 'event-row';
    const cells = [
      ev.region_id,
      ev.activity,
      ev.start_window,
      ev.end_window,
      ev.peak_window,
      String(ev.peak_z),
      String(ev.mean_z),
      String(ev.duration_windows),
    ];
    for (const c of cells) {
      const td = document.createElement('td');
      td.textContent = c;
      tr.appendChild(td);
    }
    table.appendChild(tr);
  }
  wrap.appendChild(table);
  return wrap;
}

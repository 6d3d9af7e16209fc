/**
 * Clusters mode: choropleth of the stored k-means assignment, a centroid
 * panel for the clicked cluster, and a cross-city compare table. A missing k
 * turns into a prompt listing the ks the store actually has.
 */

import { ApiError, ClustersPayload } from '../api';
import { lineChart, ChartSeries } from '../charts';
import { GridMap } from '../mapview';
import { clusterColor, seriesColor } from '../scale';
import { ViewContext } from '../context';
import { WEEKDAYS, binName } from './timeseries';

const BINS_PER_DAY = 96;

/** Pull the bracketed list out of "no model for k=9; available: [2, 3]". */
export function availableKs(message: string): number[] {
  const m = message.match(/\[([\d,\s]*)\]/);
  if (!m || m[1].trim() === '') return [];
  return m[1].split(',').map((s) => parseInt(s.trim(), 10));
}

/** Per-type slices of one concatenated centroid vector. */
export function centroidBlocks(payload: ClustersPayload, cluster: number): ChartSeries[] {
  const vec = payload.centroids[cluster];
  const blockLen = vec.length / payload.types.length;
  return payload.types.map((typeName, t) => ({
    label: typeName,
    color: seriesColor(t),
    values: vec.slice(t * blockLen, (t + 1) * blockLen),
  }));
}

export class ClustersView {
  /** Cluster whose centroid panel is open; view-local, not in the URL. */
  private selectedCluster = 0;

  async render(container: HTMLElement, ctx: ViewContext): Promise<void> {
    const { state, api } = ctx;
    container.replaceChildren();

    let payload: ClustersPayload;
    try {
      payload = await api.clusters(state.city, state.k);
    } catch (err) {
      if (!ctx.generationOk()) return;
      if (err instanceof ApiError && err.code === 'cluster_model_not_found') {
        container.appendChild(this.missingKPrompt(err.message, ctx));
        return;
      }
      ctx.reportError(err);
      return;
    }
    if (!ctx.generationOk()) return;
    if (this.selectedCluster >= payload.k) this.selectedCluster = 0;

    const layout = document.createElement('div');
    layout.className = 'view-layout';
    const mapBox = document.createElement('div');
    mapBox.className = 'map-box';
    const sideBox = document.createElement('div');
    sideBox.className = 'chart-box';
    layout.appendChild(mapBox);
    layout.appendChild(sideBox);
    container.appendChild(layout);

    const map = new GridMap(mapBox, {
      basemapUrl: ctx.basemapUrl,
      onCellClick: (regionId) => {
        const cluster = payload.assignment[regionId];
        if (cluster !== undefined) this.openCentroid(cluster, payload, sideBox, ctx);
      },
    });
    map.setRegions(ctx.cells, []);
    map.setCellStyle((regionId) => {
      const cluster = payload.assignment[regionId];
      if (cluster === undefined) return { fill: null };
      return { fill: clusterColor(cluster), fillOpacity: 0.7 };
    });

    sideBox.appendChild(this.kPicker(ctx));
    sideBox.appendChild(this.legend(payload, sideBox, ctx));

    const centroidHost = document.createElement('div');
    centroidHost.className = 'centroid-host';
    sideBox.appendChild(centroidHost);
    this.renderCentroid(payload, centroidHost);

    sideBox.appendChild(await this.comparePanel(payload, ctx));
  }

  private kPicker(ctx: ViewContext): HTMLElement {
    const row = document.createElement('div');
    row.className = 'panel-controls';
    const label = document.createElement('span');
    label.textContent = 'k = ';
    row.appendChild(label);
    const input = document.createElement('input');
    input.type = 'number';
    input.className = 'k-input';
    input.min = '2';
    input.value = String(ctx.state.k);
    input.addEventListener('change', () => {
      const k = parseInt(input.value, 10);
      if (Number.isFinite(k) && k >= 2) ctx.update({ k });
    });
    row.appendChild(input);
    return row;
  }

  private missingKPrompt(message: string, ctx: ViewContext): HTMLElement {
    const box = document.createElement('div');
    box.className = 'missing-k';
    const p = document.createElement('p');
    p.textContent = message;
    box.appendChild(p);
    const ks = availableKs(message);
    for (const k of ks) {
      const btn = document.createElement('button');
      btn.className = 'k-option';
      btn.textContent = `k=${k}`;
      btn.addEventListener('click', () => ctx.update({ k }));
      box.appendChild(btn);
    }
    return box;
  }

  private legend(payload: ClustersPayload, sideBox: HTMLElement, ctx: ViewContext): HTMLElement {
    const legend = document.createElement('ul');
    legend.className = 'cluster-legend';
    for (let i = 0; i < payload.k; i++) {
      const li = document.createElement('li');
      li.className = 'legend-entry';
      const swatch = document.createElement('span');
      swatch.className = 'swatch';
      swatch.style.background = clusterColor(i);
      li.appendChild(swatch);
      const text = document.createElement('span');
      text.textContent = `${i}: ${payload.labels[String(i)]}`;
      li.appendChild(text);
      li.addEventListener('click', () => this.openCentroid(i, payload, sideBox, ctx));
      legend.appendChild(li);
    }
    return legend;
  }

  private openCentroid(
    cluster: number,
    payload: ClustersPayload,
    sideBox: HTMLElement,
    ctx: ViewContext,
  ): void {
    this.selectedCluster = cluster;
    const host = sideBox.querySelector<HTMLElement>('.centroid-host');
    if (host) this.renderCentroid(payload, host);
  }

  private renderCentroid(payload: ClustersPayload, host: HTMLElement): void {
    host.replaceChildren();
    const i = this.selectedCluster;
    const head = document.createElement('h3');
    head.textContent = `cluster ${i}: ${payload.labels[String(i)]}`;
    host.appendChild(head);
    const chartHost = document.createElement('div');
    chartHost.className = 'centroid-chart';
    host.appendChild(chartHost);
    lineChart(chartHost, {
      series: centroidBlocks(payload, i),
      dayGrid: { binsPerDay: BINS_PER_DAY, labels: WEEKDAYS },
      xKey: binName,
      height: 200,
    });
  }

  private async comparePanel(payload: ClustersPayload, ctx: ViewContext): Promise<HTMLElement> {
    const { state, api } = ctx;
    const box = document.createElement('div');
    box.className = 'compare-panel';
    const head = document.createElement('h3');
    head.textContent = 'compare with';
    box.appendChild(head);

    const select = document.createElement('select');
    select.className = 'compare-select';
    const none = document.createElement('option');
    none.value = '';
    none.textContent = '(none)';
    select.appendChild(none);
    for (const name of ctx.cities) {
      const opt = document.createElement('option');
      opt.value = name;
      opt.textContent = name;
      opt.selected = name === state.compare;
      select.appendChild(opt);
    }
    select.addEventListener('change', () => {
      ctx.update({ compare: select.value === '' ? null : select.value });
    });
    box.appendChild(select);

    if (state.compare === null) return box;
    try {
      const cmp = await api.compare(state.city, state.k, state.compare);
      if (!ctx.generationOk()) return box;
      const table = document.createElement('table');
      table.className = 'compare-table';
      const head = document.createElement('tr');
      for (const h of [state.city, cmp.other_city, 'distance']) {
        const th = document.createElement('th');
        th.textContent = h;
        head.appendChild(th);
      }
      table.appendChild(head);
      for (const pair of cmp.pairs) {
        const tr = document.createElement('tr');
        tr.className = 'compare-row';
        const cells = [
          `${pair.a}: ${cmp.labels[String(pair.a)]}`,
          `${pair.b}: ${cmp.other_labels[String(pair.b)]}`,
          String(pair.distance),
        ];
        for (const c of cells) {
          const td = document.createElement('td');
          td.textContent = c;
          tr.appendChild(td);
        }
        table.appendChild(tr);
      }
      box.appendChild(table);
    } catch (err) {
      if (ctx.generationOk()) ctx.reportError(err);
    }
    return box;
  }
}

/**
 * App shell: owns the ViewState, keeps it in sync with the address bar, and
 * routes rendering to the active mode. Every state change bumps a generation
 * counter; fetches finishing for an older generation are dropped, so a slow
 * response can never overwrite a newer view.
 */

import { Api, CellRegion, CityMeta, DistrictRegion, FetchLike, Region } from './api';
import { BannerArea } from './banners';
import { describeError, ViewContext } from './context';
import { decodeState, encodeState, Mode, ViewState } from './state';
import { ClustersView } from './views/clusters';
import { DensityView } from './views/density';
import { TimeseriesView } from './views/timeseries';

export interface BootOptions {
  fetchFn?: FetchLike;
  apiBase?: string;
  basemapUrl?: string | null;
  /** Skip history.pushState (tests drive state directly). */
  noHistory?: boolean;
}

const MODE_NAMES: { id: Mode; label: string }[] = [
  { id: 'timeseries', label: 'time series' },
  { id: 'clusters', label: 'clusters' },
  { id: 'density', label: 'density' },
];

interface CityData {
  meta: CityMeta;
  cells: CellRegion[];
  districts: DistrictRegion[];
}

export class App {
  readonly root: HTMLElement;
  readonly api: Api;
  readonly banners: BannerArea;
  state: ViewState;

  private options: BootOptions;
  private generation = 0;
  private cities: string[] = [];
  private cityCache = new Map<string, CityData>();
  private header: HTMLElement;
  private viewBox: HTMLElement;

  constructor(root: HTMLElement, options: BootOptions = {}) {
    this.root = root;
    this.options = options;
    this.api = new Api(options.apiBase ?? '', options.fetchFn ?? ((url) => fetch(url)));
    this.state = decodeState(typeof location !== 'undefined' ? location.search : '');
    this.banners = new BannerArea();

    this.header = document.createElement('header');
    this.header.className = 'app-header';
    this.viewBox = document.createElement('main');
    this.viewBox.className = 'view-box';
    root.replaceChildren(this.header, this.banners.el, this.viewBox);

    if (!options.noHistory && typeof window !== 'undefined') {
      window.addEventListener('popstate', () => {
        this.state = decodeState(location.search);
        void this.render();
      });
    }
  }

  async start(): Promise<void> {
    try {
      this.cities = await this.api.cities();
    } catch (err) {
      const { code, message } = describeError(err);
      this.banners.show(code, message);
      return;
    }
    if (this.cities.length === 0) {
      this.banners.show('empty_store', 'the store contains no built cities');
      return;
    }
    if (!this.cities.includes(this.state.city)) {
      this.state.city = this.cities[0];
    }
    await this.render();
  }

  update(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    if (!this.options.noHistory && typeof history !== 'undefined') {
      const query = encodeState(this.state);
      history.pushState(null, '', query === '' ? location.pathname : query);
    }
    void this.render();
  }

  /** One full render pass; later passes invalidate in-flight fetches. */
  async render(): Promise<void> {
    this.generation += 1;
    const gen = this.generation;
    const generationOk = () => gen === this.generation;

    this.renderHeader();

    let data: CityData;
    try {
      data = await this.cityData(this.state.city);
    } catch (err) {
      if (!generationOk()) return;
      const { code, message } = describeError(err);
      this.banners.show(code, message);
      this.viewBox.replaceChildren();
      return;
    }
    if (!generationOk()) return;

    const ctx: ViewContext = {
      api: this.api,
      state: this.state,
      meta: data.meta,
      cells: data.cells,
      districts: this.state.mode === 'timeseries' ? data.districts : [],
      cities: this.cities,
      banners: this.banners,
      basemapUrl: this.options.basemapUrl ?? null,
      update: (patch) => this.update(patch),
      generationOk,
      reportError: (err) => {
        const { code, message } = describeError(err);
        this.banners.show(code, message);
      },
    };

    const view =
      this.state.mode === 'clusters'
        ? new ClustersView()
        : this.state.mode === 'density'
          ? new DensityView()
          : new TimeseriesView();
    try {
      await view.render(this.viewBox, ctx);
    } catch (err) {
      if (!generationOk()) return;
      ctx.reportError(err);
    }
  }

  private async cityData(city: string): Promise<CityData> {
    const cached = this.cityCache.get(city);
    if (cached) return cached;
    const [meta, regions] = await Promise.all([this.api.meta(city), this.api.regions(city)]);
    const cells: CellRegion[] = [];
    const districts: DistrictRegion[] = [];
    for (const region of regions.regions as Region[]) {
      if (region.kind === 'cell') cells.push(region);
      else if (region.kind === 'district') districts.push(region);
    }
    const data = { meta, cells, districts };
    this.cityCache.set(city, data);
    return data;
  }

  private renderHeader(): void {
    this.header.replaceChildren();

    const tabs = document.createElement('nav');
    tabs.className = 'mode-tabs';
    for (const { id, label } of MODE_NAMES) {
      const btn = document.createElement('button');
      btn.textContent = label;
      btn.className = this.state.mode === id ? 'tab active' : 'tab';
      btn.setAttribute('data-mode', id);
      btn.addEventListener('click', () => this.update({ mode: id }));
      tabs.appendChild(btn);
    }
    this.header.appendChild(tabs);

    const citySelect = document.createElement('select');
    citySelect.className = 'city-select';
    for (const name of this.cities) {
      const opt = document.createElement('option');
      opt.value = name;
      opt.textContent = name;
      opt.selected = name === this.state.city;
      citySelect.appendChild(opt);
    }
    citySelect.addEventListener('change', () => {
      // region selection does not carry across cities
      this.update({ city: citySelect.value, regions: [] });
    });
    this.header.appendChild(citySelect);

    const typeSelect = document.createElement('select');
    typeSelect.className = 'type-select';
    const meta = this.cityCache.get(this.state.city);
    const types = meta ? meta.meta.types : [this.state.type];
    for (const t of types) {
      const opt = document.createElement('option');
      opt.value = t;
      opt.textContent = t;
      opt.selected = t === this.state.type;
      typeSelect.appendChild(opt);
    }
    typeSelect.addEventListener('change', () => {
      const patch: Partial<ViewState> = { type: typeSelect.value };
      if (this.state.versus === typeSelect.value) {
        // keep ratio denominators distinct from the numerator
        patch.versus = this.state.type;
      }
      this.update(patch);
    });
    this.header.appendChild(typeSelect);
  }
}

export async function boot(root: HTMLElement, options: BootOptions = {}): Promise<App> {
  const app = new App(root, options);
  await app.start();
  return app;
}

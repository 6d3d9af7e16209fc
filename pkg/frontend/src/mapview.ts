/**
 * Slippy-map pane with the analysis grid drawn on top.
 *
 * Basemap tiles come from a configurable {z}/{x}/{y} URL template; when the
 * template is unset or a tile fails to load (offline sandbox, bad URL) the
 * pane stays blank and the grid remains fully usable. Cells are clickable
 * polygons; districts render as outlines.
 */

import { CellRegion, DistrictRegion } from './api';

const SVG_NS = 'http://www.w3.org/2000/svg';
const TILE_SIZE = 256;
const MAX_ZOOM = 18;
const MIN_ZOOM = 1;

export function lonToWorldX(lon: number, zoom: number): number {
  return ((lon + 180) / 360) * TILE_SIZE * Math.pow(2, zoom);
}

export function latToWorldY(lat: number, zoom: number): number {
  const clamped = Math.max(-85.05112878, Math.min(85.05112878, lat));
  const rad = (clamped * Math.PI) / 180;
  const merc = Math.log(Math.tan(rad) + 1 / Math.cos(rad));
  return ((1 - merc / Math.PI) / 2) * TILE_SIZE * Math.pow(2, zoom);
}

export interface CellStyle {
  /** Fill color, or null to leave the cell uncolored. */
  fill: string | null;
  fillOpacity?: number;
  stroke?: string;
  strokeWidth?: number;
}

export interface MapOptions {
  width?: number;
  height?: number;
  /** Tile URL template with {z}/{x}/{y}; null disables the basemap. */
  basemapUrl?: string | null;
  onCellClick?: (regionId: string) => void;
  onCellEnter?: (regionId: string, target: SVGElement) => void;
  onCellLeave?: () => void;
}

const DEFAULT_STYLE: CellStyle = { fill: null, stroke: '#5a6a7a', strokeWidth: 1 };

export class GridMap {
  readonly el: HTMLElement;
  private width: number;
  private height: number;
  private basemapUrl: string | null;
  private options: MapOptions;

  private tilePane: HTMLElement;
  private svg: SVGSVGElement;
  private cellLayer: SVGGElement;
  private districtLayer: SVGGElement;

  private cells: CellRegion[] = [];
  private districts: DistrictRegion[] = [];
  private cellEls = new Map<string, SVGPolygonElement>();
  private styleFn: (regionId: string) => CellStyle = () => DEFAULT_STYLE;

  private centerLat = 0;
  private centerLon = 0;
  private zoom = 10;

  constructor(container: HTMLElement, options: MapOptions = {}) {
    this.options = options;
    this.width = options.width ?? 430;
    this.height = options.height ?? 430;
    this.basemapUrl = options.basemapUrl ?? null;

    this.el = document.createElement('div');
    this.el.className = 'grid-map';
    this.el.style.width = `${this.width}px`;
    this.el.style.height = `${this.height}px`;

    this.tilePane = document.createElement('div');
    this.tilePane.className = 'tile-pane';
    this.el.appendChild(this.tilePane);

    this.svg = document.createElementNS(SVG_NS, 'svg');
    this.svg.setAttribute('class', 'map-overlay');
    this.svg.setAttribute('width', String(this.width));
    this.svg.setAttribute('height', String(this.height));
    this.districtLayer = document.createElementNS(SVG_NS, 'g');
    this.cellLayer = document.createElementNS(SVG_NS, 'g');
    this.svg.appendChild(this.districtLayer);
    this.svg.appendChild(this.cellLayer);
    this.el.appendChild(this.svg);

    const zoomBox = document.createElement('div');
    zoomBox.className = 'zoom-controls';
    for (const [text, delta] of [
      ['+', 1],
      ['−', -1],
    ] as const) {
      const btn = document.createElement('button');
      btn.textContent = text;
      btn.addEventListener('click', () => this.zoomBy(delta));
      zoomBox.appendChild(btn);
    }
    this.el.appendChild(zoomBox);

    this.wireDrag();
    container.appendChild(this.el);
  }

  /** Replace the drawn regions and refit the viewport to their extent. */
  setRegions(cells: CellRegion[], districts: DistrictRegion[]): void {
    this.cells = cells;
    this.districts = districts;
    this.fitBounds();
    this.render();
  }

  setCellStyle(fn: (regionId: string) => CellStyle): void {
    this.styleFn = fn;
    for (const [regionId, el] of this.cellEls) this.applyStyle(el, fn(regionId));
  }

  cellElement(regionId: string): SVGPolygonElement | null {
    return this.cellEls.get(regionId) ?? null;
  }

  private fitBounds(): void {
    let latMin = Infinity;
    let latMax = -Infinity;
    let lonMin = Infinity;
    let lonMax = -Infinity;
    for (const cell of this.cells) {
      latMin = Math.min(latMin, cell.bounds[0]);
      lonMin = Math.min(lonMin, cell.bounds[1]);
      latMax = Math.max(latMax, cell.bounds[2]);
      lonMax = Math.max(lonMax, cell.bounds[3]);
    }
    for (const d of this.districts) {
      for (const ring of d.rings) {
        for (const [lat, lon] of ring) {
          latMin = Math.min(latMin, lat);
          lonMin = Math.min(lonMin, lon);
          latMax = Math.max(latMax, lat);
          lonMax = Math.max(lonMax, lon);
        }
      }
    }
    if (!isFinite(latMin)) return;
    this.centerLat = (latMin + latMax) / 2;
    this.centerLon = (lonMin + lonMax) / 2;
    for (let z = MAX_ZOOM; z >= MIN_ZOOM; z--) {
      const w = lonToWorldX(lonMax, z) - lonToWorldX(lonMin, z);
      const h = latToWorldY(latMin, z) - latToWorldY(latMax, z);
      if (w <= this.width * 0.9 && h <= this.height * 0.9) {
        this.zoom = z;
        return;
      }
    }
    this.zoom = MIN_ZOOM;
  }

  private zoomBy(delta: number): void {
    const next = Math.max(MIN_ZOOM, Math.min(MAX_ZOOM, this.zoom + delta));
    if (next === this.zoom) return;
    this.zoom = next;
    this.render();
  }

  private wireDrag(): void {
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    this.el.addEventListener('mousedown', (ev: MouseEvent) => {
      dragging = true;
      lastX = ev.clientX;
      lastY = ev.clientY;
    });
    window.addEventListener('mousemove', (ev: MouseEvent) => {
      if (!dragging) return;
      const scale = TILE_SIZE * Math.pow(2, this.zoom);
      const dx = ev.clientX - lastX;
      const dy = ev.clientY - lastY;
      lastX = ev.clientX;
      lastY = ev.clientY;
      // invert the pixel delta back to degrees at the current zoom
      this.centerLon -= (dx / scale) * 360;
      const y = latToWorldY(this.centerLat, this.zoom) - dy;
      const n = Math.PI - (2 * Math.PI * y) / scale;
      this.centerLat = (180 / Math.PI) * Math.atan(Math.sinh(n));
      this.render();
    });
    window.addEventListener('mouseup', () => {
      dragging = false;
    });
  }

  private toScreen(lat: number, lon: number): [number, number] {
    const x = lonToWorldX(lon, this.zoom) - lonToWorldX(this.centerLon, this.zoom);
    const y = latToWorldY(lat, this.zoom) - latToWorldY(this.centerLat, this.zoom);
    return [x + this.width / 2, y + this.height / 2];
  }

  private render(): void {
    this.renderTiles();
    this.renderDistricts();
    this.renderCells();
  }

  private renderTiles(): void {
    this.tilePane.replaceChildren();
    if (!this.basemapUrl) return;
    const z = this.zoom;
    const worldTiles = Math.pow(2, z);
    const cx = lonToWorldX(this.centerLon, z);
    const cy = latToWorldY(this.centerLat, z);
    const x0 = Math.floor((cx - this.width / 2) / TILE_SIZE);
    const x1 = Math.floor((cx + this.width / 2) / TILE_SIZE);
    const y0 = Math.floor((cy - this.height / 2) / TILE_SIZE);
    const y1 = Math.floor((cy + this.height / 2) / TILE_SIZE);
    for (let ty = Math.max(0, y0); ty <= Math.min(worldTiles - 1, y1); ty++) {
      for (let tx = x0; tx <= x1; tx++) {
        const wrapped = ((tx % worldTiles) + worldTiles) % worldTiles;
        const img = document.createElement('img');
        img.src = this.basemapUrl
          .replace('{z}', String(z))
          .replace('{x}', String(wrapped))
          .replace('{y}', String(ty));
        img.className = 'tile';
        img.style.left = `${tx * TILE_SIZE - cx + this.width / 2}px`;
        img.style.top = `${ty * TILE_SIZE - cy + this.height / 2}px`;
        img.addEventListener('error', () => img.remove());
        this.tilePane.appendChild(img);
      }
    }
  }

  private renderDistricts(): void {
    this.districtLayer.replaceChildren();
    for (const d of this.districts) {
      let path = '';
      for (const ring of d.rings) {
        ring.forEach(([lat, lon], i) => {
          const [x, y] = this.toScreen(lat, lon);
          path += `${i === 0 ? 'M' : 'L'}${x.toFixed(1)},${y.toFixed(1)}`;
        });
        path += 'Z';
      }
      const el = document.createElementNS(SVG_NS, 'path');
      el.setAttribute('d', path);
      el.setAttribute('class', 'district-outline');
      el.setAttribute('data-region', d.region_id);
      const title = document.createElementNS(SVG_NS, 'title');
      title.textContent = `${d.region_id} ${d.name}`;
      el.appendChild(title);
      this.districtLayer.appendChild(el);
    }
  }

  private renderCells(): void {
    this.cellLayer.replaceChildren();
    this.cellEls.clear();
    for (const cell of this.cells) {
      const [latMin, lonMin, latMax, lonMax] = cell.bounds;
      const corners: [number, number][] = [
        [latMax, lonMin],
        [latMax, lonMax],
        [latMin, lonMax],
        [latMin, lonMin],
      ];
      const points = corners
        .map(([lat, lon]) => this.toScreen(lat, lon))
        .map(([x, y]) => `${x.toFixed(1)},${y.toFixed(1)}`)
        .join(' ');
      const poly = document.createElementNS(SVG_NS, 'polygon');
      poly.setAttribute('points', points);
      poly.setAttribute('class', 'grid-cell');
      poly.setAttribute('data-region', cell.region_id);
      this.applyStyle(poly, this.styleFn(cell.region_id));
      if (this.options.onCellClick) {
        poly.addEventListener('click', () => this.options.onCellClick!(cell.region_id));
      }
      if (this.options.onCellEnter) {
        poly.addEventListener('mouseenter', () => this.options.onCellEnter!(cell.region_id, poly));
      }
      if (this.options.onCellLeave) {
        poly.addEventListener('mouseleave', () => this.options.onCellLeave!());
      }
      this.cellEls.set(cell.region_id, poly);
      this.cellLayer.appendChild(poly);
    }
  }

  private applyStyle(el: SVGElement, style: CellStyle): void {
    el.setAttribute('fill', style.fill ?? 'none');
    el.setAttribute('fill-opacity', String(style.fillOpacity ?? (style.fill ? 0.75 : 0)));
    el.setAttribute('stroke', style.stroke ?? '#5a6a7a');
    el.setAttribute('stroke-width', String(style.strokeWidth ?? 1));
  }
}

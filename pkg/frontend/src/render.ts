import type { TrajectoryWire } from './types.js';

/** Canvas playback of a 2D path with a trailing fade: the most recent
 * samples draw darkest, so time reads as shade. Environments without a 2D
 * context (tests) get a static textual fallback. */

const CANVAS_SIZE = 180;
const TRAIL = 40; // samples kept visible behind the cursor

interface Animation {
  handle: number;
  canvas: HTMLCanvasElement;
}

const animations = new Set<Animation>();

export function stopAllAnimations(): void {
  for (const anim of animations) {
    cancelAnimationFrame(anim.handle);
  }
  animations.clear();
}

function toCanvas(p: [number, number]): [number, number] {
  // unit box [-1, 1]^2 onto the canvas, y up
  const x = ((p[0] + 1) / 2) * CANVAS_SIZE;
  const y = (1 - (p[1] + 1) / 2) * CANVAS_SIZE;
  return [x, y];
}

function drawFrame(
  ctx: CanvasRenderingContext2D,
  points: [number, number][],
  cursor: number,
): void {
  ctx.clearRect(0, 0, CANVAS_SIZE, CANVAS_SIZE);
  // faint full path for orientation
  ctx.strokeStyle = 'rgba(120, 120, 120, 0.18)';
  ctx.lineWidth = 1;
  ctx.beginPath();
  points.forEach((p, i) => {
    const [x, y] = toCanvas(p);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
  // trailing segment, later samples darker
  const start = Math.max(0, cursor - TRAIL);
  for (let i = start + 1; i <= cursor; i++) {
    const age = (i - start) / TRAIL; // 0 oldest .. 1 newest
    ctx.strokeStyle = `rgba(20, 40, 90, ${0.15 + 0.85 * age})`;
    ctx.lineWidth = 1 + 1.5 * age;
    ctx.beginPath();
    const [x0, y0] = toCanvas(points[i - 1]!);
    const [x1, y1] = toCanvas(points[i]!);
    ctx.moveTo(x0, y0);
    ctx.lineTo(x1, y1);
    ctx.stroke();
  }
}

export function animateTrajectory(canvas: HTMLCanvasElement, traj: TrajectoryWire): void {
  canvas.width = CANVAS_SIZE;
  canvas.height = CANVAS_SIZE;
  const ctx = canvas.getContext && canvas.getContext('2d');
  if (!ctx) {
    canvas.setAttribute('data-fallback', `path of ${traj.points.length} samples`);
    return;
  }
  let cursor = 1;
  const anim: Animation = { handle: 0, canvas };
  const tick = () => {
    drawFrame(ctx, traj.points, cursor);
    cursor = (cursor + 1) % traj.points.length;
    if (cursor === 0) cursor = 1;
    anim.handle = requestAnimationFrame(tick);
  };
  anim.handle = requestAnimationFrame(tick);
  animations.add(anim);
}

export function renderCard(
  doc: Document,
  traj: TrajectoryWire,
  index: number,
  onSelect: (index: number) => void,
): HTMLElement {
  const card = doc.createElement('div');
  card.className = 'card';
  card.dataset.index = String(index);
  const label = doc.createElement('div');
  label.className = 'card-label';
  label.textContent = `candidate ${index + 1}`;
  const canvas = doc.createElement('canvas');
  canvas.className = 'traj';
  card.append(label, canvas);
  card.addEventListener('click', () => onSelect(index));
  animateTrajectory(canvas, traj);
  return card;
}

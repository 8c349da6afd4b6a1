/** Keyboard shortcuts: 0/1 label, u undo, arrows navigate, v cycles view size. */

import type { TriageSession } from './state.js';

export type KeyAction =
  | { kind: 'label'; value: 0 | 1 }
  | { kind: 'undo' }
  | { kind: 'window'; delta: number }
  | { kind: 'queue'; delta: number }
  | { kind: 'cycle-view' }
  | { kind: 'retry' };

export function actionForKey(key: string): KeyAction | null {
  switch (key) {
    case '0':
      return { kind: 'label', value: 0 };
    case '1':
      return { kind: 'label', value: 1 };
    case 'u':
      return { kind: 'undo' };
    case 'ArrowLeft':
      return { kind: 'window', delta: -1 };
    case 'ArrowRight':
      return { kind: 'window', delta: 1 };
    case 'ArrowUp':
      return { kind: 'queue', delta: -1 };
    case 'ArrowDown':
      return { kind: 'queue', delta: 1 };
    case 'v':
      return { kind: 'cycle-view' };
    case 'r':
      return { kind: 'retry' };
    default:
      return null;
  }
}

export async function applyAction(session: TriageSession, action: KeyAction): Promise<void> {
  switch (action.kind) {
    case 'label':
      await session.label(action.value);
      break;
    case 'undo':
      await session.undo();
      break;
    case 'window':
      session.shiftWindow(action.delta);
      break;
    case 'queue':
      if (action.delta < 0) await session.focusPrevious();
      else await session.focusNext();
      break;
    case 'cycle-view':
      session.cycleImagesPerView();
      break;
    case 'retry':
      await session.retryPending();
      break;
  }
}

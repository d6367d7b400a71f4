/** Small DOM construction helpers. */

export function el<K extends keyof HTMLElementTagNameMap>(
    tag: K, className = '', text = ''): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

export function errorText(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

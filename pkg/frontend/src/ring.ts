// Bounded ring buffers for telemetry history. Once full they overwrite the
// oldest entry; nothing here ever grows.

export class ColumnRing {
  readonly rows: number;
  readonly capacity: number;
  private data: Float32Array;
  private head = 0; // next write slot
  private count = 0;

  constructor(rows: number, capacity: number) {
    if (rows < 1 || capacity < 1) {
      throw new RangeError(`ring needs rows >= 1 and capacity >= 1, got ${rows}x${capacity}`);
    }
    this.rows = rows;
    this.capacity = capacity;
    this.data = new Float32Array(rows * capacity);
  }

  get length(): number {
    return this.count;
  }

  push(column: ArrayLike<number>): void {
    if (column.length !== this.rows) {
      throw new RangeError(`column length ${column.length} != ${this.rows}`);
    }
    const base = this.head * this.rows;
    for (let r = 0; r < this.rows; r++) {
      this.data[base + r] = column[r];
    }
    this.head = (this.head + 1) % this.capacity;
    if (this.count < this.capacity) {
      this.count++;
    }
  }

  /** Column i, with 0 the oldest retained and length-1 the newest. A view, not a copy. */
  column(i: number): Float32Array {
    if (i < 0 || i >= this.count) {
      throw new RangeError(`column ${i} out of range 0..${this.count - 1}`);
    }
    const slot = (this.head - this.count + i + this.capacity * 2) % this.capacity;
    return this.data.subarray(slot * this.rows, (slot + 1) * this.rows);
  }

  latest(): Float32Array | null {
    return this.count === 0 ? null : this.column(this.count - 1);
  }

  clear(): void {
    this.head = 0;
    this.count = 0;
  }
}

export class ScalarRing {
  readonly capacity: number;
  private data: Float64Array;
  private head = 0;
  private count = 0;

  constructor(capacity: number) {
    if (capacity < 1) {
      throw new RangeError(`capacity must be >= 1, got ${capacity}`);
    }
    this.capacity = capacity;
    this.data = new Float64Array(capacity);
  }

  get length(): number {
    return this.count;
  }

  push(value: number): void {
    this.data[this.head] = value;
    this.head = (this.head + 1) % this.capacity;
    if (this.count < this.capacity) {
      this.count++;
    }
  }

  at(i: number): number {
    if (i < 0 || i >= this.count) {
      throw new RangeError(`index ${i} out of range 0..${this.count - 1}`);
    }
    const slot = (this.head - this.count + i + this.capacity * 2) % this.capacity;
    return this.data[slot];
  }

  latest(): number | null {
    return this.count === 0 ? null : this.at(this.count - 1);
  }

  clear(): void {
    this.head = 0;
    this.count = 0;
  }
}

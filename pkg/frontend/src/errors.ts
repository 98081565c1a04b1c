/** Typed failures surfaced by the bindings. */

export class ConfigError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ConfigError";
  }
}

export class ShapeMismatch extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ShapeMismatch";
  }
}

export class ClosedHandle extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ClosedHandle";
  }
}

/** The engine process failed; carries its stderr diagnostic. */
export class EngineError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "EngineError";
  }
}

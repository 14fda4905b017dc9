// Client-side mirror of the server's Boolean expression grammar, so invalid
// expressions are flagged inline before submission.
//
//   Atom := NAME | "(" NAME "," REGION ")"
//   Expr := Atom | "(" Expr ")" | "NOT" Expr | Expr "AND" Expr | Expr "OR" Expr
//
// Precedence NOT > AND > OR.

import { REGIONS, Region } from "./types.js";

export type Expr =
  | { op: "atom"; name: string; region: Region | null }
  | { op: "not"; child: Expr }
  | { op: "and"; left: Expr; right: Expr }
  | { op: "or"; left: Expr; right: Expr };

export class ExpressionError extends Error {}

const NAME_RE = /^[A-Za-z_][A-Za-z0-9_]*$/;
const TOKEN_RE = /\s*([A-Za-z_][A-Za-z0-9_]*|\(|\)|,)/y;

function tokenize(text: string): string[] {
  const tokens: string[] = [];
  let pos = 0;
  while (pos < text.length) {
    TOKEN_RE.lastIndex = pos;
    const m = TOKEN_RE.exec(text);
    if (!m) {
      if (text.slice(pos).trim()) {
        throw new ExpressionError(
          `bad character in expression at ${pos}: ${JSON.stringify(text[pos])}`,
        );
      }
      break;
    }
    tokens.push(m[1]);
    pos = TOKEN_RE.lastIndex;
  }
  return tokens;
}

class Parser {
  private pos = 0;

  constructor(private tokens: string[]) {}

  private peek(): string | null {
    return this.pos < this.tokens.length ? this.tokens[this.pos] : null;
  }

  private next(): string {
    const tok = this.peek();
    if (tok === null) throw new ExpressionError("unexpected end of expression");
    this.pos += 1;
    return tok;
  }

  private expect(tok: string): void {
    const got = this.next();
    if (got !== tok) {
      throw new ExpressionError(`expected ${JSON.stringify(tok)}, got ${JSON.stringify(got)}`);
    }
  }

  parse(): Expr {
    const node = this.parseOr();
    if (this.peek() !== null) {
      throw new ExpressionError(`trailing tokens from ${JSON.stringify(this.peek())}`);
    }
    return node;
  }

  private parseOr(): Expr {
    let node = this.parseAnd();
    while (this.peek()?.toUpperCase() === "OR") {
      this.next();
      node = { op: "or", left: node, right: this.parseAnd() };
    }
    return node;
  }

  private parseAnd(): Expr {
    let node = this.parseUnary();
    while (this.peek()?.toUpperCase() === "AND") {
      this.next();
      node = { op: "and", left: node, right: this.parseUnary() };
    }
    return node;
  }

  private parseUnary(): Expr {
    if (this.peek()?.toUpperCase() === "NOT") {
      this.next();
      return { op: "not", child: this.parseUnary() };
    }
    return this.parsePrimary();
  }

  private parsePrimary(): Expr {
    const tok = this.next();
    if (tok === "(") {
      // "(NAME, REGION)" is an atom; anything else is a group.
      const name = this.tokens[this.pos];
      if (
        this.pos + 1 < this.tokens.length &&
        this.tokens[this.pos + 1] === "," &&
        NAME_RE.test(name) &&
        !["AND", "OR", "NOT"].includes(name.toUpperCase())
      ) {
        this.next();
        this.expect(",");
        const region = this.next().toLowerCase();
        if (!(REGIONS as string[]).includes(region)) {
          throw new ExpressionError(`unknown region ${JSON.stringify(region)}`);
        }
        this.expect(")");
        return { op: "atom", name, region: region as Region };
      }
      const node = this.parseOr();
      this.expect(")");
      return node;
    }
    if (tok === ")" || tok === ",") {
      throw new ExpressionError(`unexpected ${JSON.stringify(tok)}`);
    }
    if (["AND", "OR", "NOT"].includes(tok.toUpperCase())) {
      throw new ExpressionError(`unexpected operator ${JSON.stringify(tok)}`);
    }
    return { op: "atom", name: tok, region: null };
  }
}

export function parseExpression(text: string): Expr {
  const tokens = tokenize(text);
  if (tokens.length === 0) throw new ExpressionError("empty expression");
  return new Parser(tokens).parse();
}

export function expressionAtoms(
  node: Expr,
  negated = false,
): Array<[{ name: string; region: Region | null }, boolean]> {
  switch (node.op) {
    case "atom":
      return [[{ name: node.name, region: node.region }, negated]];
    case "not":
      return expressionAtoms(node.child, !negated);
    default:
      return [
        ...expressionAtoms(node.left, negated),
        ...expressionAtoms(node.right, negated),
      ];
  }
}

export interface ValidationIssue {
  message: string;
}

// Mirrors the server's full query validation for expressions: grammar,
// layout references, and the at-least-one-positive-atom rule.
export function validateExpression(
  text: string,
  layoutNames: string[],
): ValidationIssue[] {
  let expr: Expr;
  try {
    expr = parseExpression(text);
  } catch (err) {
    return [{ message: (err as Error).message }];
  }
  const issues: ValidationIssue[] = [];
  const atoms = expressionAtoms(expr);
  for (const [atom] of atoms) {
    if (!layoutNames.includes(atom.name)) {
      issues.push({ message: `unknown layout ${JSON.stringify(atom.name)}` });
    }
  }
  if (!atoms.some(([, negated]) => !negated)) {
    issues.push({ message: "expression needs at least one positive atom" });
  }
  return issues;
}

// "A AND NOT C" with region bottom on A -> "(A,bottom) AND NOT C".
export function formatAtom(name: string, region: Region | null): string {
  return region === null ? name : `(${name},${region})`;
}

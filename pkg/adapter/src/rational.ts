/** Exact rationals over bigint with the canonical reduced form the broker's
 * codecs expect: lowest terms, denominator strictly positive. */

export interface Rational {
  readonly num: bigint;
  readonly den: bigint;
}

const gcd = (a: bigint, b: bigint): bigint => {
  a = a < 0n ? -a : a;
  b = b < 0n ? -b : b;
  while (b) [a, b] = [b, a % b];
  return a;
};

export class ZeroDenominator extends Error {}

/** Reduce to lowest terms; the sign lives on the numerator. */
export function rational(num: bigint, den: bigint): Rational {
  if (den === 0n) throw new ZeroDenominator("zero denominator");
  const g = gcd(num, den) || 1n;
  const sign = den < 0n ? -1n : 1n;
  return { num: (sign * num) / g, den: (sign * den) / g };
}

export function add(a: Rational, b: Rational): Rational {
  return rational(a.num * b.den + b.num * a.den, a.den * b.den);
}

/** rational-as-tuple-of-int decode: a two-element JSON array of integers. */
export function decodeRational(data: unknown): Rational {
  if (!Array.isArray(data) || data.length !== 2)
    throw new TypeError(`not a pair: ${JSON.stringify(data)}`);
  const [num, den] = data;
  if (!Number.isInteger(num) || !Number.isInteger(den))
    throw new TypeError(`not an integer pair: ${JSON.stringify(data)}`);
  return rational(BigInt(num), BigInt(den));
}

/** rational-as-tuple-of-int encode: canonical [num, den]. */
export function encodeRational(r: Rational): [number, number] {
  return [toSafeNumber(r.num), toSafeNumber(r.den)];
}

function toSafeNumber(x: bigint): number {
  // the wire carries JSON numbers; refuse anything a double would corrupt
  if (x > BigInt(Number.MAX_SAFE_INTEGER) || x < -BigInt(Number.MAX_SAFE_INTEGER))
    throw new RangeError(`integer too large for the wire: ${x}`);
  return Number(x);
}

/** The expression form ``rat(num, den)`` used for by-value arguments. */
export function rationalFromExpr(body: any): Rational {
  if (body && typeof body.int === "string") return rational(BigInt(body.int), 1n);
  if (body && Array.isArray(body.app) && body.app.length === 3
      && body.app[0]?.sym === "mitm:field?rat") {
    return rational(BigInt(body.app[1].int), BigInt(body.app[2].int));
  }
  throw new TypeError(`not a rational expression: ${JSON.stringify(body)}`);
}

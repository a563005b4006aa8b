/** Spoken output via the Web Speech API, plus denomination wording. */

const ONES = [
  "zero", "one", "two", "three", "four", "five", "six", "seven", "eight",
  "nine", "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen",
  "sixteen", "seventeen", "eighteen", "nineteen",
];
const TENS = [
  "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy",
  "eighty", "ninety",
];

function belowThousand(n: number): string {
  const parts: string[] = [];
  if (n >= 100) {
    parts.push(ONES[Math.floor(n / 100)] + " hundred");
    n %= 100;
  }
  if (n >= 20) {
    const tens = TENS[Math.floor(n / 10)];
    parts.push(n % 10 ? tens + " " + ONES[n % 10] : tens);
  } else if (n > 0) {
    parts.push(ONES[n]);
  }
  return parts.join(" ");
}

export function numberToWords(n: number): string {
  if (!Number.isInteger(n) || n < 0 || n > 999999) return String(n);
  if (n === 0) return "zero";
  const parts: string[] = [];
  if (n >= 1000) {
    parts.push(belowThousand(Math.floor(n / 1000)) + " thousand");
    n %= 1000;
  }
  if (n > 0) parts.push(belowThousand(n));
  return parts.join(" ");
}

/** "1000" becomes "one thousand"; non-numeric labels are spoken verbatim. */
export function wordsForLabel(label: string): string {
  const trimmed = label.trim();
  if (/^\d+$/.test(trimmed)) return numberToWords(parseInt(trimmed, 10));
  return trimmed;
}

export function speechSupported(): boolean {
  return typeof window !== "undefined" && "speechSynthesis" in window;
}

export function speak(text: string): void {
  if (!speechSupported()) return;
  try {
    const u = new SpeechSynthesisUtterance(text);
    u.lang = "en-US";
    window.speechSynthesis.cancel();
    window.speechSynthesis.speak(u);
  } catch {
    // speech is an enhancement; the visible status line carries the same text
  }
}

// ============================================================================
// Control API payload types
// ============================================================================
//
// These mirror the JSON the labelloop server emits. Everything the UI shows
// is reconstructed from these payloads; the browser never holds authoritative
// state of its own.
export {};

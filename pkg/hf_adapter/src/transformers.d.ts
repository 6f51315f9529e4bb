// Optional dependency, loaded lazily; the engine ships without it and
// refuses transformer mode at startup when it is absent.
declare module "@huggingface/transformers";

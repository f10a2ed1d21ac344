package com.dyn.config;

public final class Config {
    public static final String CIPHER = "AES/GCM/NoPadding";
    public static final String ALGO = "SHA-512";

    private Config() {
    }
}

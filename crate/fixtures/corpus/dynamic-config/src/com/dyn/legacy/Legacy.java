package com.dyn.legacy;

public final class Legacy {
    public static final String ALGO = "MD5";
}

package com.legacy.hash;

import java.security.MessageDigest;

public class Checksum {
    private static final String FILE_DIGEST = "SHA-1";

    // MessageDigest.getInstance("MD5") was the previous default
    public static byte[] fileDigest(byte[] data) throws Exception {
        MessageDigest md = MessageDigest.getInstance(FILE_DIGEST);
        return md.digest(data);
    }

    public static byte[] quick(byte[] data) throws Exception {
        return MessageDigest.getInstance("SHA1").digest(data);
    }

    public static String describe() {
        return "uses Cipher.getInstance(\"DES\") nowhere";
    }
}
